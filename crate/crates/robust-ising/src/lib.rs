//! Outlier-robust parameter learning for Ising models and exponential
//! families, together with the exact small-dimension oracles and Monte Carlo
//! checks used to validate the estimators.
//!
//! The crate is organized around:
//!
//! - [`model`]: parameter representation, membership checks, conditional
//!   models, and the model JSON format;
//! - [`enumerate`]: brute-force partition values, moments, and total
//!   variation distances for small dimension;
//! - [`projection`]: approximate Euclidean projection onto the row-l1 /
//!   field-box feasible set;
//! - [`glauber`]: heat-bath sampling with mixing-time control;
//! - [`suffstats`] and [`moments`]: sufficient-statistic layouts and Monte
//!   Carlo moment estimation;
//! - [`optim`] and [`mle`]: projected gradient descent with approximate
//!   oracles, and maximum-likelihood recovery from a mean vector;
//! - [`filters`]: robust mean estimators (bounded-covariance and
//!   near-identity spectral filters);
//! - [`attack`]: sample-replacement contamination for benchmarking;
//! - [`learner`]: the full whiten-and-filter refinement loop, in zero-field
//!   and external-field instantiations;
//! - [`verify`]: Monte Carlo verification of variance bounds and
//!   sub-exponential tails.
//!
//! Randomized routines take explicit 64-bit master seeds and derive per-unit
//! seeds (see [`seeding`]), so all results are reproducible bit-for-bit
//! regardless of thread count. Data-parallel loops use rayon when the
//! `parallel` feature (default) is enabled.

pub mod attack;
pub mod enumerate;
pub mod error;
pub mod filters;
pub mod glauber;
pub mod learner;
pub mod mle;
pub mod model;
pub mod moments;
pub mod optim;
pub mod par;
pub mod projection;
pub mod samples;
pub mod seeding;
pub mod suffstats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{DobrushinSpec, IsingParameters};
pub use samples::SampleSet;
