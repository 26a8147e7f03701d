//! Signal detection in the heteroscedastic Gaussian sequence model
//! Y_j = θ_j + σ_j ε_j: test procedures, closed-form minimax separation
//! rates, least-favorable priors with exact χ²-divergences, tail bounds for
//! noncentral weighted χ² statistics, and a deterministic Monte Carlo
//! harness that verifies level, power, and rate scaling.

// Validation uses `!(v > 0.0)` so that NaN parameters fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod priors;
pub mod procedures;
pub mod quantiles;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use model::{LpBody, Observation, Signal, SignalClass, VarianceProfile, WeightSeq};
pub use procedures::{PreparedTest, TestKind, TestOutcome, TestProcedure};
pub use quantiles::QuantileMethod;
pub use rng::NoiseSource;
