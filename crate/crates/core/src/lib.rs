//! Pairwise-judged evolutionary search over generated solutions.
//!
//! Candidates are sampled from a generator, compared in pairs by a judge,
//! ranked with a regularized Bradley-Terry fit, and improved by mutation
//! conditioned on the judge's critiques. Supporting modules estimate
//! effective Elo, simulate selection accuracy at fixed budgets, and run
//! baseline selectors.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the common `f64` instantiations.

pub mod backend;
pub mod baselines;
pub mod bt;
pub mod elo;
pub mod error;
pub mod judge;
pub mod lbfgs;
pub mod pairing;
pub mod pipeline;
pub mod population;
pub mod prompts;
pub mod scalar;
pub mod scaling;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ScoreVector = bt::ScoreVector<f64>;
pub type ScoreVector32 = bt::ScoreVector<f32>;
pub type FitOptions = bt::FitOptions<f64>;
pub type EloConfig = elo::EloConfig<f64>;
pub type EloEstimate = elo::EloEstimate<f64>;
pub type ProblemOutcome = elo::ProblemOutcome<f64>;
