//! Stochastic linear bandits on L^p balls: hard-instance construction, the
//! closed-form optimal action, baseline and optimism policies, and a
//! per-trajectory auditor for the regret lower-bound argument.

pub mod bruteforce;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod instance;
pub mod policies;
pub mod proofcheck;
pub mod seeding;
pub mod util;

pub use error::{Error, Result};
