//! Experience-transfer population initialization for binary genetic algorithms
//! running under tight function-evaluation budgets.
//!
//! The crate is organised around the two stages of the method:
//!
//! * offline: [`repository`] samples solved instances and distils each one into a
//!   VAE surrogate ([`neural`]); [`gating`] trains the experience-selection network
//!   with PGPE.
//! * online: [`transfer`] probes a new instance, picks the most relevant
//!   experiences, fine-tunes their decoders and emits an initial population for
//!   the GAs in [`optimizers`].
//!
//! [`problems`] holds the benchmark problem classes and [`bench`] the experiment
//! harness and the rank-sum statistics used to compare initializers.

pub mod bench;
pub mod codec;
mod error;
pub mod gating;
pub mod neural;
pub mod optimizers;
pub mod par;
pub mod problems;
pub mod repository;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
pub use optimizers::BudgetMeter;
pub use problems::{Instance, Objective, ProblemClass, Solution};
