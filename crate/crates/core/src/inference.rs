//! Grid-based Bayesian inference on a one-parameter thermal family.
//!
//! A [`PosteriorGrid`] stores a log-density on uniformly spaced nodes of some
//! coordinate (by default the flat coordinate `lambda` of its sample model)
//! and integrates with the trapezoid rule. Densities always refer to the
//! node coordinate; `p(c) dc = p(lambda) dlambda` converts between them.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csv::fmt_f64;
use crate::error::{config, Error, Result};
use crate::measurement::{MeasurementModel, Outcome};
use crate::sample_models::{SampleModel, TemperatureDomain};
use crate::special::bessel_i0e;

/// Smallest admissible number of grid nodes.
pub const MIN_GRID_SIZE: usize = 512;
pub const DEFAULT_GRID_SIZE: usize = 2048;

/// Below this `|alpha|` the smoothed density uses its `alpha -> 0` limit.
pub const ALPHA_ZERO_THRESHOLD: f64 = 1e-6;

/// Boundary density above this fraction of the peak violates the vanishing
/// boundary condition of the Bayesian information bound.
pub const BOUNDARY_FLAG_RATIO: f64 = 1e-6;

/// Coordinate in which the grid nodes are uniformly spaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridCoordinate {
    /// The flat coordinate of the grid's sample model.
    #[default]
    Lambda,
    /// Temperature `theta`.
    Temperature,
    /// Inverse temperature `beta = 1/theta`.
    InverseTemperature,
}

/// Smoothing parameter and support of the smoothed Jeffreys prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha: f64,
    pub domain: TemperatureDomain,
}

impl PriorSpec {
    pub fn new(alpha: f64, domain: TemperatureDomain) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(config(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha, domain })
    }
}

/// `N(alpha) = L (exp(alpha/2) I0(alpha/2) - 1)`, the normaliser of the
/// smoothed density on a `lambda` interval of width `width`.
pub fn normalization_constant(alpha: f64, width: f64) -> f64 {
    // exp(alpha/2) I0(alpha/2) = exp(alpha/2 + |alpha|/2) i0e(alpha/2)
    let scaled = bessel_i0e(alpha / 2.0);
    if alpha <= 0.0 {
        width * (scaled - 1.0)
    } else {
        width * (alpha.exp() * scaled - 1.0)
    }
}

/// Log of the smoothed density `f` at normalised position `u in [0, 1]`
/// of a `lambda` interval of width `width`.
pub fn log_smoothed_density(alpha: f64, u: f64, width: f64) -> f64 {
    let s = (PI * u).sin().powi(2);
    if alpha.abs() < ALPHA_ZERO_THRESHOLD {
        return (2.0 * s / width).ln();
    }
    let scaled = bessel_i0e(alpha / 2.0);
    if alpha < 0.0 {
        (-(alpha * s).exp_m1()).ln() - width.ln() - (1.0 - scaled).ln()
    } else {
        // ln(e^y - 1) = y + ln(1 - e^{-y}); ln(e^a i0e - 1) = a + ln(i0e - e^{-a})
        let y = alpha * s;
        let num = if y > 0.0 {
            y + (-(-y).exp_m1()).ln()
        } else {
            f64::NEG_INFINITY
        };
        num - width.ln() - (alpha + (scaled - (-alpha).exp()).ln())
    }
}

#[derive(Debug)]
struct Geometry {
    model: SampleModel,
    domain: TemperatureDomain,
    coordinate: GridCoordinate,
    nodes: Vec<f64>,
    spacing: f64,
    thetas: Vec<f64>,
    lambdas: Vec<f64>,
    /// `|d lambda / d c|` at the nodes.
    jacobian: Vec<f64>,
    /// Trapezoid weights `c_i * spacing`.
    quad: Vec<f64>,
}

impl Geometry {
    fn new(model: SampleModel, domain: TemperatureDomain, coordinate: GridCoordinate, n: usize) -> Result<Self> {
        if n < MIN_GRID_SIZE {
            return Err(config(format!("grid needs at least {MIN_GRID_SIZE} nodes, got {n}")));
        }
        model.validate()?;
        // recompute so the cached lambda bounds belong to this model
        let domain = TemperatureDomain::new(&model, domain.theta_min, domain.theta_max)?;
        let (lo, hi) = match coordinate {
            GridCoordinate::Lambda => (domain.lambda_min, domain.lambda_max),
            GridCoordinate::Temperature => (domain.theta_min, domain.theta_max),
            GridCoordinate::InverseTemperature => (1.0 / domain.theta_max, 1.0 / domain.theta_min),
        };
        let spacing = (hi - lo) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + i as f64 * spacing })
            .collect();
        let mut thetas = Vec::with_capacity(n);
        for (i, &c) in nodes.iter().enumerate() {
            let t = match coordinate {
                GridCoordinate::Lambda => {
                    if i == 0 {
                        domain.theta_min
                    } else if i == n - 1 {
                        domain.theta_max
                    } else {
                        model.theta_of_lambda(c)?
                    }
                }
                GridCoordinate::Temperature => c,
                GridCoordinate::InverseTemperature => {
                    if i == 0 {
                        domain.theta_max
                    } else if i == n - 1 {
                        domain.theta_min
                    } else {
                        1.0 / c
                    }
                }
            };
            thetas.push(t);
        }
        let lambdas: Vec<f64> = match coordinate {
            GridCoordinate::Lambda => nodes.clone(),
            _ => thetas.iter().map(|&t| model.lambda_unchecked(t)).collect(),
        };
        let jacobian = thetas
            .iter()
            .map(|&t| {
                let root = model.qfi_unchecked(t).sqrt();
                match coordinate {
                    GridCoordinate::Lambda => 1.0,
                    GridCoordinate::Temperature => root,
                    GridCoordinate::InverseTemperature => root * t * t,
                }
            })
            .collect();
        let quad = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * spacing } else { spacing })
            .collect();
        Ok(Self {
            model,
            domain,
            coordinate,
            nodes,
            spacing,
            thetas,
            lambdas,
            jacobian,
            quad,
        })
    }
}

/// Discretised probability density over a temperature interval.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    geometry: Arc<Geometry>,
    log_weights: Vec<f64>,
    log_evidence: f64,
}

/// Point estimate as a flat coordinate value and the matching temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub lambda: f64,
    pub theta: f64,
}

/// Bayesian information of a density together with its boundary diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianInformation {
    pub value: f64,
    /// Largest boundary density relative to the peak density.
    pub boundary_ratio: f64,
    /// Set when the density does not vanish at the domain boundary.
    pub boundary_flagged: bool,
}

impl PosteriorGrid {
    /// Grid with log-density `log_density(theta, lambda)` relative to `lambda`,
    /// normalised on the grid.
    pub fn from_lambda_density(
        model: SampleModel,
        domain: TemperatureDomain,
        coordinate: GridCoordinate,
        grid_size: usize,
        log_density: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let geometry = Geometry::new(model, domain, coordinate, grid_size)?;
        let log_weights = (0..grid_size)
            .map(|i| log_density(geometry.thetas[i], geometry.lambdas[i]) + geometry.jacobian[i].ln())
            .collect();
        let mut grid = Self {
            geometry: Arc::new(geometry),
            log_weights,
            log_evidence: 0.0,
        };
        grid.log_evidence = grid.normalize()?;
        Ok(grid)
    }

    /// Smoothed Jeffreys prior on a grid uniform in `coordinate`.
    pub fn smoothed_jeffreys(
        spec: &PriorSpec,
        model: &SampleModel,
        coordinate: GridCoordinate,
        grid_size: usize,
    ) -> Result<Self> {
        let domain = TemperatureDomain::new(model, spec.domain.theta_min, spec.domain.theta_max)?;
        let (lmin, width) = (domain.lambda_min, domain.lambda_width());
        let alpha = spec.alpha;
        Self::from_lambda_density(*model, domain, coordinate, grid_size, |_, lam| {
            let u = ((lam - lmin) / width).clamp(0.0, 1.0);
            log_smoothed_density(alpha, u, width)
        })
    }

    fn normalize(&mut self) -> Result<f64> {
        let g = &self.geometry;
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Inference("density has no finite weight".into()));
        }
        let sum: f64 = self
            .log_weights
            .iter()
            .zip(&g.quad)
            .map(|(&l, &q)| q * (l - max).exp())
            .sum();
        let log_z = max + sum.ln();
        if !log_z.is_finite() {
            return Err(Error::Inference("density cannot be normalised".into()));
        }
        for l in &mut self.log_weights {
            *l -= log_z;
        }
        Ok(log_z)
    }

    pub fn model(&self) -> &SampleModel {
        &self.geometry.model
    }

    pub fn domain(&self) -> &TemperatureDomain {
        &self.geometry.domain
    }

    pub fn coordinate(&self) -> GridCoordinate {
        self.geometry.coordinate
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Node positions in the grid coordinate.
    pub fn nodes(&self) -> &[f64] {
        &self.geometry.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.geometry.spacing
    }

    pub fn thetas(&self) -> &[f64] {
        &self.geometry.thetas
    }

    /// Flat coordinate of the grid model at every node.
    pub fn lambdas(&self) -> &[f64] {
        &self.geometry.lambdas
    }

    /// `|d lambda / d c|` at every node.
    pub fn jacobian(&self) -> &[f64] {
        &self.geometry.jacobian
    }

    /// Trapezoid quadrature weights.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.geometry.quad
    }

    /// Log-density with respect to the grid coordinate.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `ln p(x)` of the last update relative to the grid measure (the
    /// normaliser of the initial density for a fresh grid).
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Density with respect to the grid model's `lambda` at every node.
    pub fn lambda_density(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.geometry.jacobian)
            .map(|(&l, &j)| l.exp() / j)
            .collect()
    }

    /// Probability mass per node (density times quadrature weight).
    pub fn masses(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.geometry.quad)
            .map(|(&l, &q)| q * l.exp())
            .collect()
    }

    /// Trapezoid integral of the density; one after every normalisation.
    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Posterior expectation of `f(theta, lambda)`.
    pub fn expectation(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.geometry;
        (0..self.len())
            .map(|i| g.quad[i] * self.log_weights[i].exp() * f(g.thetas[i], g.lambdas[i]))
            .sum()
    }

    /// Grid with the same geometry and the given unnormalised log-weights.
    pub fn with_log_weights(&self, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != self.len() {
            return Err(config(format!(
                "expected {} weights, got {}",
                self.len(),
                log_weights.len()
            )));
        }
        let mut grid = Self {
            geometry: Arc::clone(&self.geometry),
            log_weights,
            log_evidence: 0.0,
        };
        grid.log_evidence = grid.normalize()?;
        Ok(grid)
    }

    /// Bayes update with an arbitrary log-likelihood of temperature.
    pub fn update_with(&self, log_likelihood: impl Fn(f64) -> f64) -> Result<Self> {
        let lw = self
            .log_weights
            .iter()
            .zip(&self.geometry.thetas)
            .map(|(&l, &t)| l + log_likelihood(t))
            .collect();
        self.with_log_weights(lw)
    }

    /// Flat coordinate of `reference` at every node.
    pub fn reference_lambdas(&self, reference: &SampleModel) -> Vec<f64> {
        if reference == &self.geometry.model {
            self.geometry.lambdas.clone()
        } else {
            self.geometry
                .thetas
                .iter()
                .map(|&t| reference.lambda_unchecked(t))
                .collect()
        }
    }

    /// Posterior mean of `reference`'s flat coordinate and its temperature.
    pub fn mean_in(&self, reference: &SampleModel) -> Estimate {
        let lams = self.reference_lambdas(reference);
        let mean: f64 = self.masses().iter().zip(&lams).map(|(m, l)| m * l).sum();
        let lo = reference.lambda_unchecked(self.domain().theta_min);
        let hi = reference.lambda_unchecked(self.domain().theta_max);
        let lambda = mean.clamp(lo, hi);
        let theta = reference.theta_of_lambda(lambda).unwrap_or_else(|_| {
            if lambda - lo < hi - lambda {
                self.domain().theta_min
            } else {
                self.domain().theta_max
            }
        });
        Estimate { lambda, theta }
    }

    /// Mean squared distance, under `reference`, between an estimate and the posterior.
    pub fn msd_in(&self, reference: &SampleModel, estimate_lambda: f64) -> f64 {
        let lams = self.reference_lambdas(reference);
        self.masses()
            .iter()
            .zip(&lams)
            .map(|(m, l)| m * (estimate_lambda - l).powi(2))
            .sum()
    }

    /// `|d lambda_ref / d c|` at every node for another reference family.
    pub fn reference_jacobian(&self, reference: &SampleModel) -> Vec<f64> {
        let g = &self.geometry;
        if reference == &g.model {
            return g.jacobian.clone();
        }
        g.thetas
            .iter()
            .zip(&g.jacobian)
            .map(|(&t, &j)| {
                let dtheta_dc = match g.coordinate {
                    GridCoordinate::Lambda => j / g.model.qfi_unchecked(t).sqrt(),
                    GridCoordinate::Temperature => 1.0,
                    GridCoordinate::InverseTemperature => t * t,
                };
                reference.qfi_unchecked(t).sqrt() * dtheta_dc
            })
            .collect()
    }

    /// Per-node integrand of the Bayesian information, `p (d ln p / d lambda)^2 |d lambda/d c|`,
    /// so that the information is its trapezoid integral over the grid coordinate.
    pub fn information_integrand(&self) -> Vec<f64> {
        information_integrand(&self.log_weights, &self.geometry.jacobian, self.geometry.spacing)
    }

    /// Bayesian information in the flat coordinate of `reference`.
    pub fn bayesian_information_in(&self, reference: &SampleModel) -> BayesianInformation {
        let jac = self.reference_jacobian(reference);
        let f = information_integrand(&self.log_weights, &jac, self.geometry.spacing);
        let value = f.iter().zip(&self.geometry.quad).map(|(f, q)| f * q).sum();
        let boundary_ratio = self.boundary_ratio();
        BayesianInformation {
            value,
            boundary_ratio,
            boundary_flagged: boundary_ratio > BOUNDARY_FLAG_RATIO,
        }
    }

    /// Largest boundary `lambda`-density relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let dens = self.lambda_density();
        let peak = dens.iter().copied().fold(0.0, f64::max);
        let edge = dens[0].max(dens[dens.len() - 1]);
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }
}

// p (d ln p)^2 = 4 (d sqrt p)^2, which stays finite where p vanishes
fn information_integrand(log_weights: &[f64], jacobian: &[f64], h: f64) -> Vec<f64> {
    let n = log_weights.len();
    let root: Vec<f64> = (0..n)
        .map(|i| (0.5 * log_weights[i]).exp() / jacobian[i].sqrt())
        .collect();
    (0..n)
        .map(|i| {
            let d = derivative(|k| root[k], i, n, h);
            4.0 * d * d / jacobian[i]
        })
        .collect()
}

/// Fourth-order finite-difference derivative of uniformly sampled `f` at node `i`.
/// Needs `n >= 5`.
pub(crate) fn derivative(f: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    // one-sided stencils for the two outermost nodes, mirrored at the upper edge
    let edge = |g: &dyn Fn(usize) -> f64, j: usize| match j {
        0 => -25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4),
        _ => -3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4),
    };
    let d12 = if i < 2 {
        edge(&|k| f(k), i)
    } else if i + 2 >= n {
        -edge(&|k| f(n - 1 - k), n - 1 - i)
    } else {
        f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)
    };
    d12 / (12.0 * h)
}

/// Smoothed Jeffreys prior on a grid uniform in the model's flat coordinate.
pub fn smoothed_jeffreys_prior(spec: &PriorSpec, model: &SampleModel, grid_size: usize) -> Result<PosteriorGrid> {
    PosteriorGrid::smoothed_jeffreys(spec, model, GridCoordinate::Lambda, grid_size)
}

/// Conditions the density on one measurement outcome.
pub fn bayes_update(post: &PosteriorGrid, m: &MeasurementModel, x: Outcome) -> Result<PosteriorGrid> {
    if x.0 > m.max_outcome() {
        return Err(crate::error::domain(format!(
            "outcome {} outside [0, {}]",
            x.0,
            m.max_outcome()
        )));
    }
    post.update_with(|t| m.log_likelihood_unchecked(x, t))
        .map_err(|e| match e {
            Error::Inference(msg) => Error::Inference(format!("outcome {}: {msg}", x.0)),
            other => other,
        })
}

/// Minimal mean-square-distance estimate: the posterior mean of `lambda`.
pub fn mmsd_estimate(post: &PosteriorGrid) -> Estimate {
    post.mean_in(post.model())
}

/// Mean squared thermodynamic length between `estimate_lambda` and the posterior.
pub fn msd(post: &PosteriorGrid, estimate_lambda: f64) -> f64 {
    post.msd_in(post.model(), estimate_lambda)
}

/// Estimate minimising the mean squared logarithmic error; `lambda` is `E[ln theta]`.
pub fn mmsle_estimate(post: &PosteriorGrid) -> Estimate {
    post.mean_in(&SampleModel::reservoir())
}

/// Mean squared logarithmic error of the estimate with `ln theta = log_theta_estimate`.
pub fn msle(post: &PosteriorGrid, log_theta_estimate: f64) -> f64 {
    post.msd_in(&SampleModel::reservoir(), log_theta_estimate)
}

/// `Q = int p(lambda) (d ln p / d lambda)^2 d lambda` in the grid model's flat coordinate.
pub fn bayesian_information(post: &PosteriorGrid) -> BayesianInformation {
    post.bayesian_information_in(post.model())
}

/// Inverse-CDF sampler of temperatures from a grid density.
#[derive(Debug, Clone)]
pub struct ThetaSampler {
    model: SampleModel,
    coordinate: GridCoordinate,
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl ThetaSampler {
    pub fn new(post: &PosteriorGrid) -> Self {
        let dens: Vec<f64> = post.log_weights().iter().map(|l| l.exp()).collect();
        let h = post.spacing();
        let mut cdf = Vec::with_capacity(dens.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in dens.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self {
            model: *post.model(),
            coordinate: post.coordinate(),
            nodes: post.nodes().to_vec(),
            cdf,
        }
    }

    /// Node-coordinate value at cumulative probability `u`, linear between nodes.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 {
            ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.nodes[i - 1] + frac * (self.nodes[i] - self.nodes[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = self.quantile(rng.gen::<f64>());
        let (first, last) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        match self.coordinate {
            GridCoordinate::Lambda => {
                let lam = c.clamp(first, last);
                self.model
                    .theta_of_lambda(lam)
                    .unwrap_or_else(|_| self.model.theta_of_lambda_closed(lam))
            }
            GridCoordinate::Temperature => c,
            GridCoordinate::InverseTemperature => 1.0 / c,
        }
    }
}

impl PosteriorGrid {
    /// Writes `lambda,theta,density` rows (density relative to `lambda`),
    /// preceded by `# `-prefixed comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "lambda,theta,density")?;
        let dens = self.lambda_density();
        for ((lam, theta), d) in self.lambdas().iter().zip(self.thetas()).zip(&dens) {
            writeln!(w, "{},{},{}", fmt_f64(*lam), fmt_f64(*theta), fmt_f64(*d))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spin() -> SampleModel {
        SampleModel::spin_half(1.0).unwrap()
    }

    fn spin_domain() -> TemperatureDomain {
        TemperatureDomain::new(&spin(), 0.1, 5.0).unwrap()
    }

    fn prior(alpha: f64, n: usize) -> PosteriorGrid {
        smoothed_jeffreys_prior(&PriorSpec::new(alpha, spin_domain()).unwrap(), &spin(), n).unwrap()
    }

    fn gaussian(center: f64, sigma: f64, n: usize) -> PosteriorGrid {
        PosteriorGrid::from_lambda_density(spin(), spin_domain(), GridCoordinate::Lambda, n, |_, l| {
            -0.5 * ((l - center) / sigma).powi(2)
        })
        .unwrap()
    }

    #[test]
    fn grid_size_is_checked() {
        let spec = PriorSpec::new(-2.5, spin_domain()).unwrap();
        assert!(matches!(
            smoothed_jeffreys_prior(&spec, &spin(), 100),
            Err(Error::Config(_))
        ));
        assert!(PriorSpec::new(f64::NAN, spin_domain()).is_err());
    }

    #[test]
    fn priors_are_normalised() {
        for &a in &[-50.0, -10.0, -2.5, -1e-7, 0.0, 1e-7, 3.0, 40.0, 2000.0] {
            let p = prior(a, 1024);
            assert!((p.total_mass() - 1.0).abs() < 1e-9, "alpha {a}");
            let d = p.lambda_density();
            assert!(d.iter().all(|v| v.is_finite() && *v >= 0.0), "alpha {a}");
        }
    }

    #[test]
    fn nodes_span_the_lambda_interval() {
        let p = prior(-2.5, 2048);
        let d = spin_domain();
        assert_eq!(p.lambdas()[0], d.lambda_min);
        assert_eq!(*p.lambdas().last().unwrap(), d.lambda_max);
        assert_eq!(p.thetas()[0], 0.1);
        assert_eq!(*p.thetas().last().unwrap(), 5.0);
        assert!(p.lambdas().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn alpha_zero_is_sin_squared() {
        let p = prior(0.0, 2048);
        let d = spin_domain();
        let l = d.lambda_width();
        for (lam, dens) in p.lambdas().iter().zip(p.lambda_density()) {
            let u = (lam - d.lambda_min) / l;
            let expect = 2.0 * (PI * u).sin().powi(2) / l;
            assert!((dens - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_branch_is_continuous() {
        for &u in &[0.05, 0.3, 0.5, 0.77] {
            let limit = log_smoothed_density(0.0, u, 1.3).exp();
            for &a in &[-2.0 * ALPHA_ZERO_THRESHOLD, 2.0 * ALPHA_ZERO_THRESHOLD] {
                let v = log_smoothed_density(a, u, 1.3).exp();
                assert!((v - limit).abs() < 1e-6, "alpha {a} u {u}: {v} vs {limit}");
            }
        }
    }

    #[test]
    fn normalization_constant_matches_quadrature() {
        // Simpson rule on 1e5 + 1 nodes of exp(alpha sin^2(pi u)) - 1 over [0, L]
        for &a in &[-50.0, -10.0, -2.5, 0.5, 4.0] {
            let width = 1.457;
            let n = 100_000;
            let h = width / n as f64;
            let f = |x: f64| (a * (PI * x / width).sin().powi(2)).exp_m1();
            let mut s = f(0.0) + f(width);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let quad = s * h / 3.0;
            let exact = normalization_constant(a, width);
            assert!(((exact - quad) / quad).abs() < 1e-10, "alpha {a}: {exact} vs {quad}");
        }
    }

    #[test]
    fn flat_likelihood_leaves_prior_unchanged() {
        let p = prior(-2.5, 1024);
        let q = p.update_with(|_| -3.0).unwrap();
        for (a, b) in p.log_weights().iter().zip(q.log_weights()) {
            assert!((a - b).abs() < 1e-12 || (a.is_infinite() && b.is_infinite()));
        }
        assert_relative_eq!(q.log_evidence(), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn sequential_equals_joint_update() {
        let m = MeasurementModel::spin(1.0, 3).unwrap();
        let p = prior(-2.5, 1024);
        let seq = bayes_update(&bayes_update(&p, &m, Outcome(1)).unwrap(), &m, Outcome(3)).unwrap();
        let joint = p
            .update_with(|t| m.log_likelihood(Outcome(1), t).unwrap() + m.log_likelihood(Outcome(3), t).unwrap())
            .unwrap();
        for (a, b) in seq.log_weights().iter().zip(joint.log_weights()) {
            assert!((a - b).abs() < 1e-12 || (a.is_infinite() && b.is_infinite()));
        }
    }

    #[test]
    fn impossible_data_is_reported() {
        let p = prior(-2.5, 512);
        let e = p.update_with(|_| f64::NEG_INFINITY).unwrap_err();
        assert!(matches!(e, Error::Inference(_)));
        let m = MeasurementModel::spin(1.0, 1).unwrap();
        assert!(bayes_update(&p, &m, Outcome(5)).is_err());
    }

    #[test]
    fn posterior_concentrates() {
        let m = MeasurementModel::spin(1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut p = prior(-2.5, 2048);
        for _ in 0..10_000 {
            let x = m.sample_outcome(1.0, &mut rng);
            p = bayes_update(&p, &m, x).unwrap();
            assert!((p.total_mass() - 1.0).abs() < 1e-9);
        }
        let near = p.expectation(|t, _| if (t - 1.0).abs() <= 0.1 { 1.0 } else { 0.0 });
        assert!(near > 0.99, "mass near truth {near}");
    }

    #[test]
    fn estimates_of_symmetric_and_uniform_densities() {
        let d = spin_domain();
        let c = 0.5 * (d.lambda_min + d.lambda_max);
        let g = gaussian(c, 0.05, 2048);
        assert_relative_eq!(mmsd_estimate(&g).lambda, c, epsilon = 1e-12);

        let u = PosteriorGrid::from_lambda_density(spin(), d, GridCoordinate::Lambda, 2048, |_, _| 0.0).unwrap();
        let est = mmsd_estimate(&u);
        assert_relative_eq!(est.lambda, c, epsilon = 1e-12);
        assert_relative_eq!(est.theta, spin().theta_of_lambda(c).unwrap(), max_relative = 1e-12);
        // variance of a uniform law: L^2 / 12 (trapezoid error O(h^2))
        let l = d.lambda_width();
        assert_relative_eq!(msd(&u, c), l * l / 12.0, max_relative = 1e-5);
    }

    #[test]
    fn point_mass_has_zero_msd() {
        let d = spin_domain();
        let target = 1024;
        let g = PosteriorGrid::from_lambda_density(spin(), d, GridCoordinate::Lambda, 2048, |_, _| 0.0).unwrap();
        let mut lw = vec![f64::NEG_INFINITY; 2048];
        lw[target] = 0.0;
        let point = g.with_log_weights(lw).unwrap();
        let l0 = point.lambdas()[target];
        assert_eq!(msd(&point, l0), 0.0);
    }

    #[test]
    fn msle_estimate_of_log_symmetric_density() {
        let r = SampleModel::reservoir();
        let d = TemperatureDomain::new(&r, 0.1, 10.0).unwrap();
        // symmetric in ln theta about ln 1 = 0
        let g = PosteriorGrid::from_lambda_density(r, d, GridCoordinate::Lambda, 2048, |t, _| {
            -0.5 * (t.ln() / 0.3).powi(2)
        })
        .unwrap();
        assert_relative_eq!(mmsle_estimate(&g).theta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn msd_and_msle_estimates_diverge_for_bimodal_posterior() {
        let g = PosteriorGrid::from_lambda_density(spin(), spin_domain(), GridCoordinate::Lambda, 2048, |t, _| {
            let a = (-0.5 * ((t - 0.2) / 0.02).powi(2)).exp();
            let b = (-0.5 * ((t - 4.0) / 0.3).powi(2)).exp();
            (a + b).ln()
        })
        .unwrap();
        // direct means as the oracle
        let mean_lam = g.expectation(|_, l| l);
        let mean_log = g.expectation(|t, _| t.ln());
        let a = mmsd_estimate(&g);
        let b = mmsle_estimate(&g);
        assert_relative_eq!(a.lambda, mean_lam, epsilon = 1e-12);
        assert_relative_eq!(b.theta, mean_log.exp(), max_relative = 1e-12);
        assert!((a.theta - b.theta).abs() / b.theta > 0.05, "{} vs {}", a.theta, b.theta);
    }

    #[test]
    fn gaussian_information() {
        let d = spin_domain();
        let c = 0.5 * (d.lambda_min + d.lambda_max);
        let sigma = 0.08;
        let q = bayesian_information(&gaussian(c, sigma, 2048));
        assert!(!q.boundary_flagged);
        assert!((q.value * sigma * sigma - 1.0).abs() < 0.01, "{}", q.value);
    }

    #[test]
    fn coarse_gaussian_information() {
        // eight nodes per standard deviation
        let d = spin_domain();
        let c = 0.5 * (d.lambda_min + d.lambda_max);
        let sigma = 8.0 * d.lambda_width() / 1023.0;
        let q = bayesian_information(&gaussian(c, sigma, 1024));
        assert!(
            (q.value * sigma * sigma - 1.0).abs() < 2e-4,
            "{}",
            q.value * sigma * sigma
        );
    }

    #[test]
    fn derivative_is_exact_for_quartics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 3.0 * x.powi(3) + 0.25 * x.powi(4);
        let df = |x: f64| -2.0 + x - 9.0 * x * x + x.powi(3);
        let (n, h) = (9, 0.3);
        for i in 0..n {
            let x = i as f64 * h;
            assert_relative_eq!(
                derivative(|k| f(k as f64 * h), i, n, h),
                df(x),
                max_relative = 1e-10,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn flat_density_is_flagged() {
        let u = PosteriorGrid::from_lambda_density(spin(), spin_domain(), GridCoordinate::Lambda, 2048, |_, _| 0.0)
            .unwrap();
        let q = bayesian_information(&u);
        assert!(q.boundary_flagged);
        assert!(q.value.abs() < 1e-12);
    }

    #[test]
    fn near_uniform_prior_has_no_interior_information() {
        let p = prior(-50.0, 2048);
        let f = p.information_integrand();
        let n = f.len();
        let interior: f64 = f[n / 4..3 * n / 4].iter().map(|v| v * p.spacing()).sum();
        let total = bayesian_information(&p).value;
        assert!(interior < 1e-6 * total, "interior {interior} of {total}");
    }

    #[test]
    fn sin_squared_prior_information() {
        // Independent oracle: Simpson on 1e5 + 1 nodes of (f')^2 / f for
        // f = 2 sin^2(pi u)/L, whose closed form is 4 pi^2 / L^2.
        let d = spin_domain();
        let l = d.lambda_width();
        let n = 100_000;
        let h = 1.0 / n as f64;
        let g = |u: f64| {
            let s = (PI * u).sin();
            let ds = PI * (PI * u).cos();
            if s.abs() < 1e-300 {
                8.0 * PI * PI / (l * l * l)
            } else {
                let f = 2.0 * s * s / l;
                let df = 4.0 * s * ds / (l * l);
                df * df / f
            }
        };
        let mut acc = g(0.0) + g(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        let oracle = acc * h / 3.0 * l;
        assert_relative_eq!(oracle, 4.0 * PI * PI / (l * l), max_relative = 1e-9);
        let q = bayesian_information(&prior(0.0, 2048));
        assert!(!q.boundary_flagged);
        assert!((q.value / oracle - 1.0).abs() < 5e-3, "{} vs {oracle}", q.value);
    }

    #[test]
    fn information_bounds_posterior_variance() {
        let m = MeasurementModel::spin(1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = prior(-2.5, 2048);
        for step in 0..400 {
            let x = m.sample_outcome(0.8, &mut rng);
            p = bayes_update(&p, &m, x).unwrap();
            if step % 50 == 0 {
                let est = mmsd_estimate(&p);
                let q = bayesian_information(&p).value;
                assert!(msd(&p, est.lambda) * q >= 1.0 - 1e-3);
            }
        }
    }

    #[test]
    fn sampler_matches_analytic_cdf() {
        // alpha = 0: F(u) = u - sin(2 pi u) / (2 pi) in the normalised lambda
        let p = prior(0.0, 2048);
        let d = spin_domain();
        let sampler = ThetaSampler::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 10_000;
        let mut us: Vec<f64> = (0..n)
            .map(|_| (spin().lambda(sampler.sample(&mut rng)).unwrap() - d.lambda_min) / d.lambda_width())
            .collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |u: f64| u - (2.0 * PI * u).sin() / (2.0 * PI);
        let ks = us
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let f = cdf(u);
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1e-3 critical value of the one-sample KS statistic
        assert!(ks < 1.949 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let p = prior(-2.5, 512);
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &["config_hash=abc".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# config_hash=abc"));
        assert_eq!(lines.next(), Some("lambda,theta,density"));
        assert_eq!(lines.count(), 512);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn msd_decomposition(alpha in -10.0f64..0.0, delta in -0.1f64..0.1, k in 0u32..20) {
            let m = MeasurementModel::spin(1.0, 20).unwrap();
            let p = bayes_update(&prior(alpha, 1024), &m, Outcome(k)).unwrap();
            let bar = mmsd_estimate(&p).lambda;
            let lhs = msd(&p, bar + delta);
            let rhs = msd(&p, bar) + delta * delta;
            prop_assert!((lhs - rhs).abs() < 1e-10);
            prop_assert!(lhs >= msd(&p, bar));
        }

        #[test]
        fn update_order_is_irrelevant(xs in proptest::collection::vec(0u32..4, 1..12), seed in 0u64..1000) {
            let m = MeasurementModel::spin(1.0, 3).unwrap();
            let mut shuffled = xs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            let p0 = prior(-2.5, 512);
            let run = |seq: &[u32]| {
                seq.iter().fold(p0.clone(), |p, &x| bayes_update(&p, &m, Outcome(x)).unwrap())
            };
            let (a, b) = (run(&xs), run(&shuffled));
            for (u, v) in a.log_weights().iter().zip(b.log_weights()) {
                prop_assert!((u - v).abs() < 1e-12 || (u.is_infinite() && v.is_infinite()));
            }
        }
    }
}
