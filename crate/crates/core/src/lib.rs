//! Identification of FIR systems observed through a binary threshold sensor.
//!
//! A finite-impulse-response plant `y_k = phi_k' theta + d_k` is watched
//! through a one-bit sensor `s_k = 1{y_k <= C}`: only the indicator is
//! available, never `y_k` itself.  This crate provides, on top of that
//! observation model:
//!
//! * [`estimators::Rpfi`] — a recursive, projection-free estimator that
//!   stays stable through a cut-off prediction and an acceleration
//!   coefficient derived from prior parameter/input bounds;
//! * [`estimators::Impf`] — a recursive estimator with adaptive step
//!   weights and a rank-one information-matrix recursion whose asymptotic
//!   covariance attains the Cramér–Rao lower bound;
//! * [`estimators::ProjectionBaseline`] — the classical projected
//!   stochastic-approximation update, kept as a comparison baseline;
//! * [`cramer_rao`] — the Cramér–Rao lower bound for this observation
//!   model, in closed form plus an independent finite-difference oracle;
//! * [`harness`] — deterministic, parallel Monte-Carlo experiments with
//!   rate fits, timing benchmarks, and CSV/JSONL export;
//! * [`presets`] — built-in example systems used by the bundled
//!   experiments and the command-line driver.

pub mod cramer_rao;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod noise;
pub mod presets;
pub mod system;

pub use error::{Error, Result};
