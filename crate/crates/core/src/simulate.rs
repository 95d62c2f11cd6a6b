//! Seeded Monte Carlo experiments: single trajectories, prior-averaged
//! ensembles and the adaptive-gap protocol.
//!
//! Trajectory `i` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(trajectory_seed(s, i))`, where
//! `trajectory_seed` is the SplitMix64 finaliser applied to
//! `s + (i + 1) * 0x9E3779B97F4A7C15`. Every trajectory first draws its true
//! temperature from the prior (one uniform, inverse CDF on the grid) and
//! then one probe outcome per repetition. Trajectories run in parallel and
//! are reduced in index order, so results do not depend on scheduling.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::csv::fmt_f64;
use crate::error::{config, domain, Error, Result};
use crate::inference::{derivative, PosteriorGrid, ThetaSampler};
use crate::measurement::{MeasurementModel, Outcome};
use crate::sample_models::SampleModel;

/// Nodes whose log-weight is this far below the peak are ignored when the
/// adaptive protocol scores candidate gaps (`e^-40 ~ 4e-18`).
const ADAPTIVE_WINDOW_NATS: f64 = 40.0;

pub const DEFAULT_NU_POINTS: usize = 30;
pub const DEFAULT_N_TRAJ: usize = 250;
pub const DEFAULT_GAP_CANDIDATES: usize = 64;

/// Seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trajectory_seed(master_seed, index))
}

/// `points` log-spaced integers from 1 to `nu_max`, deduplicated.
pub fn log_spaced_nu_grid(nu_max: usize, points: usize) -> Vec<usize> {
    if nu_max <= 1 || points <= 1 {
        return vec![nu_max.max(1)];
    }
    let top = (nu_max as f64).ln();
    let mut grid: Vec<usize> = (0..points)
        .map(|i| (top * i as f64 / (points - 1) as f64).exp().round() as usize)
        .collect();
    grid.dedup();
    *grid.last_mut().unwrap() = nu_max;
    grid
}

fn validate_nu_grid(nu_grid: &[usize]) -> Result<()> {
    if nu_grid.is_empty() {
        return Err(config("nu grid is empty"));
    }
    if nu_grid[0] == 0 {
        return Err(config("nu grid entries must be at least 1"));
    }
    if nu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config("nu grid must be strictly increasing"));
    }
    Ok(())
}

/// Posterior summary after some number of repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub theta_hat_msd: f64,
    pub theta_hat_msle: f64,
    /// Mean squared distance at the MMSD estimate (posterior variance of lambda).
    pub msd: f64,
    /// Mean squared log error at the MMSLE estimate (posterior variance of ln theta).
    pub msle: f64,
}

/// Per-node quantities that do not change along a trajectory.
struct GridTables<'a> {
    prior: &'a PosteriorGrid,
    quad: &'a [f64],
    lambdas: &'a [f64],
    log_thetas: Vec<f64>,
}

impl<'a> GridTables<'a> {
    fn new(prior: &'a PosteriorGrid) -> Self {
        Self {
            prior,
            quad: prior.quadrature_weights(),
            lambdas: prior.lambdas(),
            log_thetas: prior.thetas().iter().map(|t| t.ln()).collect(),
        }
    }

    fn summarize(&self, lw: &[f64]) -> Result<StepSummary> {
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Inference("posterior has no finite weight".into()));
        }
        let w: Vec<f64> = lw.iter().zip(self.quad).map(|(&l, &q)| q * (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean = |xs: &[f64]| w.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>() / z;
        let var = |xs: &[f64], m: f64| w.iter().zip(xs).map(|(a, b)| a * (b - m) * (b - m)).sum::<f64>() / z;
        let lam_bar = mean(self.lambdas);
        let log_bar = mean(&self.log_thetas);
        let model = self.prior.model();
        let dom = self.prior.domain();
        let lam_clamped = lam_bar.clamp(dom.lambda_min, dom.lambda_max);
        let theta_hat_msd = model
            .theta_of_lambda(lam_clamped)
            .unwrap_or(if lam_clamped <= dom.lambda_min {
                dom.theta_min
            } else {
                dom.theta_max
            });
        Ok(StepSummary {
            theta_hat_msd,
            theta_hat_msle: log_bar.exp(),
            msd: var(self.lambdas, lam_bar),
            msle: var(&self.log_thetas, log_bar),
        })
    }
}

fn add_row(lw: &mut [f64], row: &[f64]) {
    for (a, b) in lw.iter_mut().zip(row) {
        *a += *b;
    }
}

/// Everything the adaptive protocol precomputes for its candidate gaps.
struct AdaptiveTables {
    probes: Vec<MeasurementModel>,
    /// `ln p(k | theta_i)` per candidate and outcome.
    loglik: Vec<Vec<Vec<f64>>>,
    /// `h_probe(theta_i) / h_ref(theta_i)` per candidate.
    info_ratio: Vec<Vec<f64>>,
}

impl AdaptiveTables {
    fn new(prior: &PosteriorGrid, policy: &AdaptivePolicy) -> Self {
        let thetas = prior.thetas();
        let probes: Vec<MeasurementModel> = policy
            .gap_candidates
            .iter()
            .map(|&gap| MeasurementModel::SpinEnergy { gap, batch_size: 1 })
            .collect();
        let loglik = probes.iter().map(|m| m.log_likelihood_table(thetas)).collect();
        let info_ratio = probes
            .iter()
            .map(|m| {
                thetas
                    .iter()
                    .map(|&t| m.fisher_information_unchecked(t) / policy.reference.qfi_unchecked(t))
                    .collect()
            })
            .collect();
        Self {
            probes,
            loglik,
            info_ratio,
        }
    }

    /// Index of the candidate minimising the one-step BCRB of the current
    /// posterior, with that BCRB value. Ties go to the smaller gap.
    fn choose(&self, grid: &GridTables<'_>, lw: &[f64]) -> (usize, f64) {
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cut = max - ADAPTIVE_WINDOW_NATS;
        let lo = lw.iter().position(|&l| l > cut).unwrap_or(0);
        let hi = lw.iter().rposition(|&l| l > cut).unwrap_or(lw.len() - 1);
        // widen so the finite differences see the tails
        let lo = lo.saturating_sub(4);
        let hi = (hi + 4).min(lw.len() - 1);
        let w: Vec<f64> = (lo..=hi).map(|i| grid.quad[i] * (lw[i] - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let q = windowed_information(grid.prior, lw, max, z, lo, hi);
        let mut best = (0, f64::INFINITY);
        for (g, ratio) in self.info_ratio.iter().enumerate() {
            let expected: f64 = w.iter().zip(&ratio[lo..=hi]).map(|(a, b)| a * b).sum::<f64>() / z;
            let bcrb = 1.0 / (q + expected);
            if bcrb < best.1 {
                best = (g, bcrb);
            }
        }
        best
    }
}

// Bayesian information of exp(lw - max)/z restricted to nodes lo..=hi.
fn windowed_information(prior: &PosteriorGrid, lw: &[f64], max: f64, z: f64, lo: usize, hi: usize) -> f64 {
    let h = prior.spacing();
    let jac = prior.jacobian();
    let quad = prior.quadrature_weights();
    let n = lw.len();
    let log_z = z.ln();
    let root = |i: usize| (0.5 * (lw[i] - max - log_z)).exp() / jac[i].sqrt();
    (lo..=hi)
        .map(|i| {
            let d = derivative(root, i, n, h);
            quad[i] * 4.0 * d * d / jac[i]
        })
        .sum()
}

enum Probe<'a> {
    Fixed { m: MeasurementModel, table: &'a [Vec<f64>] },
    Adaptive(&'a AdaptiveTables),
}

/// One simulated repetition as seen by a step observer.
struct Step {
    index: usize,
    outcome: Outcome,
    gap: f64,
}

/// Runs `nu` repetitions at `true_theta`, starting from the prior log-weights,
/// calling `observe` after every repetition. Returns the final log-weights.
fn walk(
    grid: &GridTables<'_>,
    probe: &Probe<'_>,
    true_theta: f64,
    rng: &mut ChaCha8Rng,
    nu: usize,
    mut observe: impl FnMut(&Step, &[f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut lw = grid.prior.log_weights().to_vec();
    for index in 1..=nu {
        let (m, row_table) = match probe {
            Probe::Fixed { m, table } => (*m, *table),
            Probe::Adaptive(tables) => {
                let (g, _) = tables.choose(grid, &lw);
                (tables.probes[g], tables.loglik[g].as_slice())
            }
        };
        let outcome = m.sample_outcome(true_theta, rng);
        add_row(&mut lw, &row_table[outcome.0 as usize]);
        observe(
            &Step {
                index,
                outcome,
                gap: m.gap(),
            },
            &lw,
        )?;
    }
    Ok(lw)
}

/// One simulated measurement record with the estimates after every repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub true_theta: f64,
    pub seed: u64,
    /// Summary of the prior, before any data.
    pub initial: StepSummary,
    pub outcomes: Vec<Outcome>,
    /// Probe gap used at every repetition.
    pub gaps: Vec<f64>,
    pub estimates_msd: Vec<f64>,
    pub estimates_msle: Vec<f64>,
    pub msd_curve: Vec<f64>,
    pub msle_curve: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Rows `step,outcome,theta_hat_msd,theta_hat_msle,msd,msle,eps_adapted`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "step,outcome,theta_hat_msd,theta_hat_msle,msd,msle,eps_adapted")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i + 1,
                self.outcomes[i].0,
                fmt_f64(self.estimates_msd[i]),
                fmt_f64(self.estimates_msle[i]),
                fmt_f64(self.msd_curve[i]),
                fmt_f64(self.msle_curve[i]),
                fmt_f64(self.gaps[i]),
            )?;
        }
        Ok(())
    }
}

fn check_true_theta(prior: &PosteriorGrid, true_theta: f64) -> Result<()> {
    let d = prior.domain();
    if true_theta > d.theta_min && true_theta < d.theta_max {
        Ok(())
    } else {
        Err(domain(format!(
            "true temperature {true_theta} outside the open domain ({}, {})",
            d.theta_min, d.theta_max
        )))
    }
}

fn trajectory_with(
    prior: &PosteriorGrid,
    probe: &Probe<'_>,
    nu: usize,
    true_theta: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    check_true_theta(prior, true_theta)?;
    let grid = GridTables::new(prior);
    let initial = grid.summarize(prior.log_weights())?;
    let mut rec = TrajectoryRecord {
        true_theta,
        seed,
        initial,
        outcomes: Vec::with_capacity(nu),
        gaps: Vec::with_capacity(nu),
        estimates_msd: Vec::with_capacity(nu),
        estimates_msle: Vec::with_capacity(nu),
        msd_curve: Vec::with_capacity(nu),
        msle_curve: Vec::with_capacity(nu),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    walk(&grid, probe, true_theta, &mut rng, nu, |step, lw| {
        let s = grid.summarize(lw).map_err(|e| Error::Trajectory {
            step: step.index,
            source: Box::new(e),
        })?;
        rec.outcomes.push(step.outcome);
        rec.gaps.push(step.gap);
        rec.estimates_msd.push(s.theta_hat_msd);
        rec.estimates_msle.push(s.theta_hat_msle);
        rec.msd_curve.push(s.msd);
        rec.msle_curve.push(s.msle);
        Ok(())
    })?;
    Ok(rec)
}

/// Simulates `nu` repetitions of `m` at a fixed true temperature.
pub fn run_trajectory(
    prior: &PosteriorGrid,
    m: &MeasurementModel,
    nu: usize,
    true_theta: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    m.validate_against(prior.domain())?;
    let table = m.log_likelihood_table(prior.thetas());
    trajectory_with(prior, &Probe::Fixed { m: *m, table: &table }, nu, true_theta, seed)
}

/// Like [`run_trajectory`] with the probe gap chosen by `policy` before every repetition.
pub fn run_adaptive_trajectory(
    prior: &PosteriorGrid,
    policy: &AdaptivePolicy,
    nu: usize,
    true_theta: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    policy.validate_for(prior)?;
    let tables = AdaptiveTables::new(prior, policy);
    trajectory_with(prior, &Probe::Adaptive(&tables), nu, true_theta, seed)
}

/// Prior-averaged mean squared errors as a function of the number of repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub nu_grid: Vec<usize>,
    /// Mean over trajectories of the MSD (in the prior's reference metric).
    pub emsd: Vec<f64>,
    pub emsle: Vec<f64>,
    pub emsd_std_error: Vec<f64>,
    pub emsle_std_error: Vec<f64>,
    /// Companion bounds in the prior's reference metric. For adaptive runs
    /// these use the best candidate gap at every temperature.
    pub ecrb: Vec<f64>,
    pub bcrb: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
    pub reference: SampleModel,
    pub true_thetas: Vec<f64>,
    /// `trajectory_msd[i][j]`: MSD of trajectory `i` at `nu_grid[j]`.
    pub trajectory_msd: Vec<Vec<f64>>,
    pub trajectory_msle: Vec<Vec<f64>>,
}

impl EnsembleSummary {
    /// Rows `nu,emsd,emsle,ecrb,bcrb`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "nu,emsd,emsle,ecrb,bcrb")?;
        for j in 0..self.nu_grid.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.nu_grid[j],
                fmt_f64(self.emsd[j]),
                fmt_f64(self.emsle[j]),
                fmt_f64(self.ecrb[j]),
                fmt_f64(self.bcrb[j]),
            )?;
        }
        Ok(())
    }

    /// Position of `nu` in the grid.
    pub fn index_of(&self, nu: usize) -> Option<usize> {
        self.nu_grid.iter().position(|&v| v == nu)
    }
}

struct TrajectoryPoints {
    true_theta: f64,
    msd: Vec<f64>,
    msle: Vec<f64>,
}

fn ensemble_points(
    prior: &PosteriorGrid,
    probe: &Probe<'_>,
    nu_grid: &[usize],
    n_traj: usize,
    master_seed: u64,
) -> Result<Vec<TrajectoryPoints>> {
    let grid = GridTables::new(prior);
    let sampler = ThetaSampler::new(prior);
    let nu_max = *nu_grid.last().unwrap();
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(master_seed, i as u64);
            let true_theta = sampler.sample(&mut rng);
            let mut pts = TrajectoryPoints {
                true_theta,
                msd: Vec::with_capacity(nu_grid.len()),
                msle: Vec::with_capacity(nu_grid.len()),
            };
            let mut next = 0;
            walk(&grid, probe, true_theta, &mut rng, nu_max, |step, lw| {
                if next < nu_grid.len() && step.index == nu_grid[next] {
                    let s = grid.summarize(lw).map_err(|e| Error::Trajectory {
                        step: step.index,
                        source: Box::new(e),
                    })?;
                    pts.msd.push(s.msd);
                    pts.msle.push(s.msle);
                    next += 1;
                }
                Ok(())
            })?;
            Ok(pts)
        })
        .collect()
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn reduce(
    points: Vec<TrajectoryPoints>,
    nu_grid: &[usize],
    master_seed: u64,
    reference: SampleModel,
    ecrb: Vec<f64>,
    bcrb: Vec<f64>,
) -> EnsembleSummary {
    let n_traj = points.len();
    let mut out = EnsembleSummary {
        nu_grid: nu_grid.to_vec(),
        emsd: Vec::new(),
        emsle: Vec::new(),
        emsd_std_error: Vec::new(),
        emsle_std_error: Vec::new(),
        ecrb,
        bcrb,
        n_traj,
        master_seed,
        reference,
        true_thetas: points.iter().map(|p| p.true_theta).collect(),
        trajectory_msd: Vec::with_capacity(n_traj),
        trajectory_msle: Vec::with_capacity(n_traj),
    };
    for j in 0..nu_grid.len() {
        let (m, se) = mean_and_se(points.iter().map(|p| p.msd[j]));
        out.emsd.push(m);
        out.emsd_std_error.push(se);
        let (m, se) = mean_and_se(points.iter().map(|p| p.msle[j]));
        out.emsle.push(m);
        out.emsle_std_error.push(se);
    }
    for p in points {
        out.trajectory_msd.push(p.msd);
        out.trajectory_msle.push(p.msle);
    }
    out
}

fn check_ensemble(nu_grid: &[usize], n_traj: usize) -> Result<()> {
    validate_nu_grid(nu_grid)?;
    if n_traj < 2 {
        return Err(config(format!(
            "an ensemble needs at least 2 trajectories, got {n_traj}"
        )));
    }
    Ok(())
}

/// Averages `n_traj` trajectories whose true temperatures are drawn from the prior.
pub fn run_ensemble(
    prior: &PosteriorGrid,
    m: &MeasurementModel,
    nu_grid: &[usize],
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    check_ensemble(nu_grid, n_traj)?;
    m.validate_against(prior.domain())?;
    let table = m.log_likelihood_table(prior.thetas());
    let points = ensemble_points(
        prior,
        &Probe::Fixed { m: *m, table: &table },
        nu_grid,
        n_traj,
        master_seed,
    )?;
    let reference = *prior.model();
    let mut ecrb = Vec::with_capacity(nu_grid.len());
    let mut bcrb = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        ecrb.push(bounds::ecrb(prior, &reference, m, nu)?);
        bcrb.push(bounds::bcrb(prior, &reference, m, nu)?);
    }
    Ok(reduce(points, nu_grid, master_seed, reference, ecrb, bcrb))
}

/// Criterion minimised when choosing the next probe gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveObjective {
    /// One-step Bayesian Cramer-Rao bound of the current posterior.
    #[default]
    Bcrb,
}

/// Greedy choice of a single-spin probe gap before every repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivePolicy {
    pub gap_candidates: Vec<f64>,
    #[serde(default)]
    pub objective: AdaptiveObjective,
    pub reference: SampleModel,
}

impl AdaptivePolicy {
    /// `count` log-spaced gaps over `[theta_min / 10, 10 theta_max]`.
    pub fn log_spaced(reference: SampleModel, theta_min: f64, theta_max: f64, count: usize) -> Result<Self> {
        if count == 0 || !(theta_min > 0.0 && theta_max > theta_min) {
            return Err(config("gap candidates need count >= 1 and 0 < theta_min < theta_max"));
        }
        let (lo, hi) = ((theta_min / 10.0).ln(), (10.0 * theta_max).ln());
        let gap_candidates = if count == 1 {
            vec![(0.5 * (lo + hi)).exp()]
        } else {
            (0..count)
                .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
                .collect()
        };
        let p = Self {
            gap_candidates,
            objective: AdaptiveObjective::Bcrb,
            reference,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.reference.validate()?;
        if self.gap_candidates.is_empty() {
            return Err(config("gap_candidates is empty"));
        }
        if self.gap_candidates.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(config("gap candidates must be positive"));
        }
        if self.gap_candidates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("gap candidates must be strictly increasing"));
        }
        Ok(())
    }

    fn validate_for(&self, prior: &PosteriorGrid) -> Result<()> {
        self.validate()?;
        if &self.reference != prior.model() {
            return Err(config(format!(
                "policy reference ({}) must match the prior's reference model ({})",
                self.reference.label(),
                prior.model().label()
            )));
        }
        Ok(())
    }
}

/// Ensemble of adaptive trajectories. The companion `ecrb`/`bcrb` curves use,
/// at every temperature, the candidate gap with the largest Fisher information.
pub fn run_adaptive(
    prior: &PosteriorGrid,
    policy: &AdaptivePolicy,
    nu_grid: &[usize],
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    check_ensemble(nu_grid, n_traj)?;
    policy.validate_for(prior)?;
    let tables = AdaptiveTables::new(prior, policy);
    let points = ensemble_points(prior, &Probe::Adaptive(&tables), nu_grid, n_traj, master_seed)?;

    let best_ratio: Vec<f64> = (0..prior.len())
        .map(|i| tables.info_ratio.iter().map(|r| r[i]).fold(0.0, f64::max))
        .collect();
    let masses = prior.masses();
    let total: f64 = masses.iter().sum();
    let inv: f64 = masses.iter().zip(&best_ratio).map(|(m, r)| m / r).sum::<f64>() / total;
    let fwd: f64 = masses.iter().zip(&best_ratio).map(|(m, r)| m * r).sum::<f64>() / total;
    let q = prior.bayesian_information_in(&policy.reference).value;
    let ecrb = nu_grid.iter().map(|&nu| inv / nu as f64).collect();
    let bcrb = nu_grid.iter().map(|&nu| 1.0 / (q + nu as f64 * fwd)).collect();
    Ok(reduce(points, nu_grid, master_seed, policy.reference, ecrb, bcrb))
}

/// Final log-weights of one prior-sampled trajectory, with its true temperature.
pub(crate) fn sampled_final_posterior(
    prior: &PosteriorGrid,
    sampler: &ThetaSampler,
    m: &MeasurementModel,
    table: &[Vec<f64>],
    nu: usize,
    master_seed: u64,
    index: u64,
) -> Result<(f64, Vec<f64>)> {
    let grid = GridTables::new(prior);
    let mut rng = trajectory_rng(master_seed, index);
    let true_theta = sampler.sample(&mut rng);
    let lw = walk(
        &grid,
        &Probe::Fixed { m: *m, table },
        true_theta,
        &mut rng,
        nu,
        |_, _| Ok(()),
    )?;
    Ok((true_theta, lw))
}
