//! Experiment configuration: a single JSON document, validated up front.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thermoline::bounds::MIN_MC_DRAWS;
use thermoline::inference::{DEFAULT_GRID_SIZE, MIN_GRID_SIZE};
use thermoline::simulate::{
    log_spaced_nu_grid, AdaptivePolicy, DEFAULT_GAP_CANDIDATES, DEFAULT_NU_POINTS, DEFAULT_N_TRAJ,
};
use thermoline::{GridCoordinate, MeasurementModel, PriorSpec, SampleModel, TemperatureDomain};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn field_err(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("field `{field}`: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Prior,
    Geometry,
    Trajectory,
    Ensemble,
    Bounds,
    Adaptive,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Prior => "prior",
            Command::Geometry => "geometry",
            Command::Trajectory => "trajectory",
            Command::Ensemble => "ensemble",
            Command::Bounds => "bounds",
            Command::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub alpha: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

/// Probe measurement; a boson cutoff is derived from the domain when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementConfig {
    SpinEnergy {
        gap: f64,
        #[serde(default = "one")]
        batch_size: u32,
    },
    BosonOccupation {
        gap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<u32>,
    },
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NuGridConfig {
    List(Vec<usize>),
    LogSpaced { max: usize, points: usize },
}

impl Default for NuGridConfig {
    fn default() -> Self {
        NuGridConfig::LogSpaced {
            max: 10_000,
            points: DEFAULT_NU_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Range of `theta / gap`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub points: usize,
    #[serde(default = "unit")]
    pub gap: f64,
    #[serde(default = "unit")]
    pub capacity_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            ratio_min: 0.1,
            ratio_max: 5.0,
            points: 1000,
            gap: 1.0,
            capacity_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SampleModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_coordinate: Option<GridCoordinate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_grid: Option<NuGridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_mc: Option<usize>,
    /// Reference family of the bounds; defaults to `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<SampleModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_candidates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_gap_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    /// Artifact directory; `--output` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a JSON document; syntax and schema errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    /// SHA-256 of the compact serialisation, with the output location removed
    /// so that relocating artifacts does not change the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }

    fn require<'a, T>(&self, value: &'a Option<T>, field: &str) -> Result<&'a T, ConfigError> {
        value
            .as_ref()
            .ok_or_else(|| field_err(field, format!("required by the `{}` command", self.command.name())))
    }

    /// Checks every spec the command uses and resolves defaults.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        if self.command == Command::Geometry {
            let g = self.geometry.clone().unwrap_or_default();
            if !(g.ratio_min > 0.0 && g.ratio_max > g.ratio_min && g.ratio_max.is_finite()) {
                return Err(field_err("geometry", "need 0 < ratio_min < ratio_max"));
            }
            if g.points < 2 {
                return Err(field_err("geometry.points", "need at least 2 points"));
            }
            let models = [
                SampleModel::IdealReservoir {
                    capacity_scale: g.capacity_scale,
                },
                SampleModel::SpinHalf { gap: g.gap },
                SampleModel::BosonMode { gap: g.gap },
            ];
            for m in &models {
                m.validate().map_err(|e| field_err("geometry", e))?;
            }
            return Ok(Plan::Geometry { config: g, models });
        }

        let model = *self.require(&self.model, "model")?;
        model.validate().map_err(|e| field_err("model", e))?;
        let p = self.require(&self.prior, "prior")?;
        let domain = TemperatureDomain::new(&model, p.theta_min, p.theta_max).map_err(|e| field_err("prior", e))?;
        let spec = PriorSpec::new(p.alpha, domain).map_err(|e| field_err("prior.alpha", e))?;
        let grid_size = self.grid_size.unwrap_or(DEFAULT_GRID_SIZE);
        if grid_size < MIN_GRID_SIZE {
            return Err(field_err("grid_size", format!("must be at least {MIN_GRID_SIZE}")));
        }
        let prior = PriorPlan {
            model,
            spec,
            grid_size,
            coordinate: self.grid_coordinate.unwrap_or_default(),
        };
        if self.command == Command::Prior {
            return Ok(Plan::Prior(prior));
        }

        let nu_grid = || -> Result<Vec<usize>, ConfigError> {
            let grid = match self.nu_grid.clone().unwrap_or_default() {
                NuGridConfig::List(v) => v,
                NuGridConfig::LogSpaced { max, points } => {
                    if max == 0 || points == 0 {
                        return Err(field_err("nu_grid", "max and points must be positive"));
                    }
                    log_spaced_nu_grid(max, points)
                }
            };
            if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(field_err("nu_grid", "must be nonempty and strictly increasing"));
            }
            Ok(grid)
        };
        let n_traj = || -> Result<usize, ConfigError> {
            let n = self.n_traj.unwrap_or(DEFAULT_N_TRAJ);
            if n < 2 {
                return Err(field_err("n_traj", "need at least 2 trajectories"));
            }
            Ok(n)
        };

        if self.command == Command::Adaptive {
            if !matches!(model, SampleModel::IdealReservoir { .. }) {
                return Err(field_err(
                    "model",
                    "the adaptive protocol targets the ideal_reservoir model",
                ));
            }
            let policy = match &self.gap_candidates {
                Some(gaps) => {
                    let p = AdaptivePolicy {
                        gap_candidates: gaps.clone(),
                        objective: Default::default(),
                        reference: model,
                    };
                    p.validate().map_err(|e| field_err("gap_candidates", e))?;
                    p
                }
                None => AdaptivePolicy::log_spaced(
                    model,
                    domain.theta_min,
                    domain.theta_max,
                    self.n_gap_candidates.unwrap_or(DEFAULT_GAP_CANDIDATES),
                )
                .map_err(|e| field_err("n_gap_candidates", e))?,
            };
            return Ok(Plan::Adaptive {
                prior,
                policy,
                nu_grid: nu_grid()?,
                n_traj: n_traj()?,
            });
        }

        let measurement = match self.require(&self.measurement, "measurement")? {
            MeasurementConfig::SpinEnergy { gap, batch_size } => MeasurementModel::spin(*gap, *batch_size),
            MeasurementConfig::BosonOccupation { gap, cutoff: None } => {
                MeasurementModel::boson_occupation(*gap, &domain)
            }
            MeasurementConfig::BosonOccupation {
                gap,
                cutoff: Some(cutoff),
            } => {
                let m = MeasurementModel::BosonOccupation {
                    gap: *gap,
                    cutoff: *cutoff,
                };
                m.validate_against(&domain).map(|_| m)
            }
        }
        .map_err(|e| field_err("measurement", e))?;

        match self.command {
            Command::Trajectory => {
                let nu = *self.require(&self.nu, "nu")?;
                let true_theta = *self.require(&self.true_theta, "true_theta")?;
                if !(true_theta > domain.theta_min && true_theta < domain.theta_max) {
                    return Err(field_err(
                        "true_theta",
                        "must lie strictly inside (theta_min, theta_max)",
                    ));
                }
                Ok(Plan::Trajectory {
                    prior,
                    measurement,
                    nu,
                    true_theta,
                })
            }
            Command::Ensemble => Ok(Plan::Ensemble {
                prior,
                measurement,
                nu_grid: nu_grid()?,
                n_traj: n_traj()?,
            }),
            Command::Bounds => {
                let reference = self.reference.unwrap_or(model);
                reference.validate().map_err(|e| field_err("reference", e))?;
                let n_mc = self.n_mc.unwrap_or(DEFAULT_N_TRAJ);
                if n_mc < MIN_MC_DRAWS {
                    return Err(field_err("n_mc", format!("need at least {MIN_MC_DRAWS} draws")));
                }
                Ok(Plan::Bounds {
                    prior,
                    measurement,
                    reference,
                    nu_grid: nu_grid()?,
                    n_mc,
                })
            }
            Command::Prior | Command::Geometry | Command::Adaptive => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PriorPlan {
    pub model: SampleModel,
    pub spec: PriorSpec,
    pub grid_size: usize,
    pub coordinate: GridCoordinate,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub enum Plan {
    Prior(PriorPlan),
    Geometry {
        config: GeometryConfig,
        models: [SampleModel; 3],
    },
    Trajectory {
        prior: PriorPlan,
        measurement: MeasurementModel,
        nu: usize,
        true_theta: f64,
    },
    Ensemble {
        prior: PriorPlan,
        measurement: MeasurementModel,
        nu_grid: Vec<usize>,
        n_traj: usize,
    },
    Bounds {
        prior: PriorPlan,
        measurement: MeasurementModel,
        reference: SampleModel,
        nu_grid: Vec<usize>,
        n_mc: usize,
    },
    Adaptive {
        prior: PriorPlan,
        policy: AdaptivePolicy,
        nu_grid: Vec<usize>,
        n_traj: usize,
    },
}
