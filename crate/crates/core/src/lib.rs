//! Bayesian thermometry with thermodynamic length.
//!
//! Temperature estimates are scored by the thermodynamic length between
//! thermal states, i.e. the distance induced by the quantum Fisher
//! information of the sample. In the flat coordinate `lambda` of that metric
//! the mean squared distance is an ordinary posterior variance, so the
//! whole toolkit works on densities over `lambda`:
//!
//! - [`sample_models`]: metrics, flat coordinates and distances of the
//!   ideal reservoir, spin-1/2 and bosonic-mode families.
//! - [`measurement`]: energy-measurement likelihoods and outcome sampling.
//! - [`inference`]: grid posteriors, smoothed Jeffreys priors, estimators and
//!   the Bayesian information.
//! - [`bounds`]: expected, Bayesian and tightened Bayesian Cramer-Rao bounds.
//! - [`simulate`]: seeded Monte Carlo trajectories, ensembles and the
//!   adaptive gap protocol.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod csv;
pub mod error;
pub mod inference;
pub mod measurement;
pub mod sample_models;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use inference::{GridCoordinate, PosteriorGrid, PriorSpec};
pub use measurement::{MeasurementModel, Outcome};
pub use sample_models::{SampleModel, TemperatureDomain};
