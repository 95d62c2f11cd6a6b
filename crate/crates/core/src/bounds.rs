//! Lower bounds on the prior-averaged mean squared distance.
//!
//! All bounds are expressed in the flat coordinate of a *reference* sample
//! family, while the information per repetition comes from the probe
//! measurement. With `h_ref` the reference metric and `h_m` the probe's
//! Fisher information:
//!
//! * `ecrb = E_prior[h_ref / h_m] / nu`
//! * `bcrb = 1 / (Q_prior + nu E_prior[h_m / h_ref])`
//! * `tbcrb = E_data[1 / Q(posterior)]`, estimated by Monte Carlo.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::fmt_f64;
use crate::error::{config, domain, Result};
use crate::inference::{PosteriorGrid, ThetaSampler};
use crate::measurement::MeasurementModel;
use crate::sample_models::SampleModel;
use crate::simulate::sampled_final_posterior;

pub const MIN_MC_DRAWS: usize = 100;
/// Fraction of boundary-flagged posteriors above which a TBCRB estimate carries a warning.
pub const FLAGGED_WARNING_FRACTION: f64 = 0.05;

// Prior average of f(h_m / h_ref); errors if the probe is blind where the prior has mass.
fn prior_average_of_ratio(
    prior: &PosteriorGrid,
    reference: &SampleModel,
    m: &MeasurementModel,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let masses = prior.masses();
    let total: f64 = masses.iter().sum();
    let mut acc = 0.0;
    for (&mass, &theta) in masses.iter().zip(prior.thetas()) {
        if mass == 0.0 {
            continue;
        }
        let hm = m.fisher_information_unchecked(theta);
        if !(hm > 0.0) {
            return Err(domain(format!(
                "measurement carries no information at theta = {theta:e}, where the prior has mass"
            )));
        }
        acc += mass * f(hm / reference.qfi_unchecked(theta));
    }
    Ok(acc / total)
}

/// Expected Cramer-Rao bound after `nu >= 1` repetitions.
pub fn ecrb(prior: &PosteriorGrid, reference: &SampleModel, m: &MeasurementModel, nu: usize) -> Result<f64> {
    if nu == 0 {
        return Err(config("ecrb needs at least one repetition"));
    }
    m.validate()?;
    reference.validate()?;
    Ok(prior_average_of_ratio(prior, reference, m, |r| 1.0 / r)? / nu as f64)
}

/// Bayesian information of the prior in the reference flat coordinate.
pub fn q_prior(prior: &PosteriorGrid, reference: &SampleModel) -> f64 {
    prior.bayesian_information_in(reference).value
}

/// Bayesian (van Trees) bound after `nu` repetitions; `nu = 0` gives `1 / Q_prior`.
pub fn bcrb(prior: &PosteriorGrid, reference: &SampleModel, m: &MeasurementModel, nu: usize) -> Result<f64> {
    m.validate()?;
    reference.validate()?;
    let q = q_prior(prior, reference);
    let fwd = if nu == 0 {
        0.0
    } else {
        prior_average_of_ratio(prior, reference, m, |r| r)?
    };
    Ok(1.0 / (q + nu as f64 * fwd))
}

/// Monte Carlo estimate of the tightest Bayesian bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbcrbEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Fraction of posteriors whose density does not vanish at the boundary.
    pub flagged_fraction: f64,
    pub warning: bool,
}

/// `E[1 / Q(posterior)]` over `n_mc` data sets of `nu` repetitions, each at
/// a temperature drawn from the prior. Draw `i` uses trajectory seed `i`.
pub fn tbcrb(
    prior: &PosteriorGrid,
    reference: &SampleModel,
    m: &MeasurementModel,
    nu: usize,
    n_mc: usize,
    seed: u64,
) -> Result<TbcrbEstimate> {
    if n_mc < MIN_MC_DRAWS {
        return Err(config(format!("tbcrb needs at least {MIN_MC_DRAWS} draws, got {n_mc}")));
    }
    m.validate_against(prior.domain())?;
    reference.validate()?;
    let sampler = ThetaSampler::new(prior);
    let table = m.log_likelihood_table(prior.thetas());
    let draws: Vec<(f64, bool)> = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| {
            let (_, lw) = sampled_final_posterior(prior, &sampler, m, &table, nu, seed, i)?;
            let post = prior.with_log_weights(lw)?;
            let info = post.bayesian_information_in(reference);
            Ok((1.0 / info.value, info.boundary_flagged))
        })
        .collect::<Result<_>>()?;
    let n = n_mc as f64;
    let value = draws.iter().map(|d| d.0).sum::<f64>() / n;
    let var = draws.iter().map(|d| (d.0 - value).powi(2)).sum::<f64>() / (n - 1.0);
    let flagged_fraction = draws.iter().filter(|d| d.1).count() as f64 / n;
    Ok(TbcrbEstimate {
        value,
        std_error: (var / n).sqrt(),
        flagged_fraction,
        warning: flagged_fraction > FLAGGED_WARNING_FRACTION,
    })
}

/// All bounds at one number of repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub nu: usize,
    pub ecrb: f64,
    pub bcrb: f64,
    pub tbcrb: f64,
    pub tbcrb_std_error: f64,
    pub tbcrb_flagged_fraction: f64,
    pub q_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub reference: SampleModel,
    pub measurement: MeasurementModel,
    pub n_mc: usize,
    pub seed: u64,
    pub rows: Vec<BoundRow>,
    /// True when any TBCRB estimate has too many boundary-flagged posteriors.
    pub warning: bool,
}

impl BoundReport {
    pub fn compute(
        prior: &PosteriorGrid,
        reference: &SampleModel,
        m: &MeasurementModel,
        nu_grid: &[usize],
        n_mc: usize,
        seed: u64,
    ) -> Result<Self> {
        if nu_grid.is_empty() || nu_grid.contains(&0) {
            return Err(config("bound report needs a nonempty nu grid of positive entries"));
        }
        let q = q_prior(prior, reference);
        let mut rows = Vec::with_capacity(nu_grid.len());
        let mut warning = false;
        for &nu in nu_grid {
            let t = tbcrb(prior, reference, m, nu, n_mc, seed)?;
            warning |= t.warning;
            rows.push(BoundRow {
                nu,
                ecrb: ecrb(prior, reference, m, nu)?,
                bcrb: bcrb(prior, reference, m, nu)?,
                tbcrb: t.value,
                tbcrb_std_error: t.std_error,
                tbcrb_flagged_fraction: t.flagged_fraction,
                q_prior: q,
            });
        }
        Ok(Self {
            reference: *reference,
            measurement: *m,
            n_mc,
            seed,
            rows,
            warning,
        })
    }

    /// Rows `nu,ecrb,bcrb,tbcrb,tbcrb_std_error,q_prior`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "nu,ecrb,bcrb,tbcrb,tbcrb_std_error,q_prior")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.nu,
                fmt_f64(r.ecrb),
                fmt_f64(r.bcrb),
                fmt_f64(r.tbcrb),
                fmt_f64(r.tbcrb_std_error),
                fmt_f64(r.q_prior)
            )?;
        }
        Ok(())
    }
}
