//! Projective energy measurements on thermal probes.
//!
//! A spin probe with gap `gap` is excited with the Gibbs population
//! `p_e = 1 / (1 + exp(gap / theta))`. A batch of `batch_size` independent spins
//! is recorded as the number of excited spins, which is a sufficient statistic
//! for the batch. A bosonic probe reports its occupation number, truncated at
//! `cutoff` and renormalised.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::sample_models::{SampleModel, TemperatureDomain};

/// Smallest log-probability ever returned; `exp(-745)` is the smallest
/// subnormal double, so nothing below it can be represented anyway.
pub const LOG_LIKELIHOOD_FLOOR: f64 = -745.0;

/// Occupation cutoff is `ceil(BOSON_CUTOFF_FACTOR * theta_max / gap)`, which puts
/// the truncated tail below `exp(-40)` at the hottest temperature.
pub const BOSON_CUTOFF_FACTOR: f64 = 40.0;

/// Integer outcome of one measurement: excited-spin count or boson occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Outcome(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementModel {
    /// Energy measurement of `batch_size` spins with gap `gap`.
    SpinEnergy {
        gap: f64,
        #[serde(default = "one")]
        batch_size: u32,
    },
    /// Occupation measurement of a bosonic mode with quantum `gap`.
    BosonOccupation { gap: f64, cutoff: u32 },
}

fn one() -> u32 {
    1
}

impl MeasurementModel {
    pub fn spin(gap: f64, batch_size: u32) -> Result<Self> {
        let m = MeasurementModel::SpinEnergy { gap, batch_size };
        m.validate()?;
        Ok(m)
    }

    /// Boson occupation measurement with the cutoff derived from the domain.
    pub fn boson_occupation(gap: f64, domain: &TemperatureDomain) -> Result<Self> {
        if !(gap.is_finite() && gap > 0.0) {
            return Err(config(format!("probe gap must be positive, got {gap}")));
        }
        let cutoff = (BOSON_CUTOFF_FACTOR * domain.theta_max / gap).ceil().max(1.0);
        if cutoff > u32::MAX as f64 / 2.0 {
            return Err(config(format!("boson cutoff {cutoff} is too large")));
        }
        let m = MeasurementModel::BosonOccupation {
            gap,
            cutoff: cutoff as u32,
        };
        m.validate_against(domain)?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let gap = self.gap();
        if !(gap.is_finite() && gap > 0.0) {
            return Err(config(format!("probe gap must be positive, got {gap}")));
        }
        match *self {
            MeasurementModel::SpinEnergy { batch_size: 0, .. } => {
                Err(config("batch_size must be at least 1"))
            }
            MeasurementModel::BosonOccupation { cutoff: 0, .. } => {
                Err(config("occupation cutoff must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Validates, and for bosonic probes checks that the truncated tail
    /// probability stays below `1e-12` across the domain.
    pub fn validate_against(&self, domain: &TemperatureDomain) -> Result<()> {
        self.validate()?;
        if let MeasurementModel::BosonOccupation { gap, cutoff } = *self {
            let tail = (-(cutoff as f64 + 1.0) * gap / domain.theta_max).exp();
            if tail >= 1e-12 {
                return Err(config(format!(
                    "occupation cutoff {cutoff} leaves tail mass {tail:e} at theta_max = {}",
                    domain.theta_max
                )));
            }
        }
        Ok(())
    }

    pub fn gap(&self) -> f64 {
        match *self {
            MeasurementModel::SpinEnergy { gap, .. } | MeasurementModel::BosonOccupation { gap, .. } => gap,
        }
    }

    /// Same measurement with a different probe gap.
    pub fn with_gap(&self, gap: f64) -> Self {
        match *self {
            MeasurementModel::SpinEnergy { batch_size, .. } => MeasurementModel::SpinEnergy { gap, batch_size },
            MeasurementModel::BosonOccupation { cutoff, .. } => MeasurementModel::BosonOccupation { gap, cutoff },
        }
    }

    /// Largest valid outcome value.
    pub fn max_outcome(&self) -> u32 {
        match *self {
            MeasurementModel::SpinEnergy { batch_size, .. } => batch_size,
            MeasurementModel::BosonOccupation { cutoff, .. } => cutoff,
        }
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> {
        (0..=self.max_outcome()).map(Outcome)
    }

    fn check_outcome(&self, x: Outcome) -> Result<()> {
        if x.0 > self.max_outcome() {
            Err(domain(format!("outcome {} outside [0, {}]", x.0, self.max_outcome())))
        } else {
            Ok(())
        }
    }

    /// `ln p(x | theta)`, floored at [`LOG_LIKELIHOOD_FLOOR`].
    pub fn log_likelihood(&self, x: Outcome, theta: f64) -> Result<f64> {
        self.check_outcome(x)?;
        if !(theta > 0.0) || theta.is_nan() {
            return Err(domain(format!("temperature must be positive, got {theta}")));
        }
        Ok(self.log_likelihood_unchecked(x, theta))
    }

    pub(crate) fn log_likelihood_unchecked(&self, x: Outcome, theta: f64) -> f64 {
        let v = match *self {
            MeasurementModel::SpinEnergy { gap, batch_size } => {
                let a = gap / theta;
                let k = x.0 as f64;
                let ln_pe = -softplus(a);
                let ln_pg = -softplus(-a);
                ln_binomial(batch_size, x.0) + k * ln_pe + (batch_size as f64 - k) * ln_pg
            }
            MeasurementModel::BosonOccupation { gap, cutoff } => {
                let a = gap / theta;
                let n = x.0 as f64;
                let states = cutoff as f64 + 1.0;
                -n * a + ln_one_minus_exp(-a) - ln_one_minus_exp(-states * a)
            }
        };
        if v.is_nan() {
            LOG_LIKELIHOOD_FLOOR
        } else {
            v.max(LOG_LIKELIHOOD_FLOOR)
        }
    }

    /// Row `k` holds `ln p(k | theta_i)` for every temperature in `thetas`.
    pub fn log_likelihood_table(&self, thetas: &[f64]) -> Vec<Vec<f64>> {
        self.outcomes()
            .map(|x| thetas.iter().map(|&t| self.log_likelihood_unchecked(x, t)).collect())
            .collect()
    }

    /// Draws one outcome at temperature `theta`.
    pub fn sample_outcome<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Outcome {
        match *self {
            MeasurementModel::SpinEnergy { gap, batch_size } => {
                let p = excited_population(gap, theta);
                let k = (0..batch_size).filter(|_| rng.gen::<f64>() < p).count();
                Outcome(k as u32)
            }
            MeasurementModel::BosonOccupation { gap, cutoff } => {
                // invert F(n) = (1 - q^{n+1}) / (1 - q^{N})
                let a = gap / theta;
                let states = cutoff as f64 + 1.0;
                let u: f64 = rng.gen();
                let total = -(-states * a).exp_m1();
                let n = ((1.0 - u * total).ln() / -a).ceil() - 1.0;
                Outcome(if n.is_finite() {
                    n.clamp(0.0, cutoff as f64) as u32
                } else {
                    0
                })
            }
        }
    }

    /// Fisher information of one measurement record.
    pub fn fisher_information(&self, theta: f64) -> Result<f64> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(domain(format!("temperature must be positive and finite, got {theta}")));
        }
        Ok(self.fisher_information_unchecked(theta))
    }

    pub(crate) fn fisher_information_unchecked(&self, theta: f64) -> f64 {
        match *self {
            MeasurementModel::SpinEnergy { gap, batch_size } => {
                batch_size as f64 * SampleModel::SpinHalf { gap }.qfi_unchecked(theta)
            }
            MeasurementModel::BosonOccupation { gap, cutoff } => {
                // FI in theta = (gap/theta^2)^2 Var(n) under the truncated law
                let a = gap / theta;
                let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
                for n in 0..=cutoff {
                    let w = (-(n as f64) * a).exp();
                    if w == 0.0 {
                        break;
                    }
                    z += w;
                    m1 += w * n as f64;
                    m2 += w * (n as f64) * (n as f64);
                }
                let mean = m1 / z;
                let var = (m2 / z - mean * mean).max(0.0);
                let s = gap / (theta * theta);
                s * s * var
            }
        }
    }

    /// Whether the likelihood has the form `g(x/theta) / int g(x/theta) dx`.
    ///
    /// Always `false` here: both outcome spaces are discrete and the
    /// probabilities depend on `gap/theta`, not on `x/theta`. See
    /// [`ConstantDensityOfStates`] for a likelihood that is scale invariant.
    pub fn scale_invariance_check(&self, _theta: f64, _scale: f64) -> bool {
        false
    }
}

/// Gibbs population of the excited level of a two-level system.
pub fn excited_population(gap: f64, theta: f64) -> f64 {
    1.0 / (1.0 + (gap / theta).exp())
}

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// `ln(1 - e^{-a})` for `a > 0`.
fn ln_one_minus_exp(neg_a: f64) -> f64 {
    (-neg_a.exp_m1()).ln()
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Energy outcome of a sample with a constant density of states: the energy
/// is exponentially distributed with mean `theta`, `p(E|theta) = exp(-E/theta)/theta`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantDensityOfStates;

impl ConstantDensityOfStates {
    pub fn density(&self, energy: f64, theta: f64) -> f64 {
        if energy < 0.0 {
            0.0
        } else {
            (-energy / theta).exp() / theta
        }
    }

    /// Checks `s p(s E | s theta) = p(E | theta)` on a spread of probe energies.
    pub fn scale_invariance_check(&self, theta: f64, scale: f64) -> bool {
        (0..64).all(|i| {
            let e = theta * i as f64 / 8.0;
            let lhs = scale * self.density(scale * e, scale * theta);
            let rhs = self.density(e, theta);
            (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE)
        })
    }
}
