//! Thompson sampling with approximate posteriors in k-armed Gaussian bandits.
//!
//! The crate is organized bottom-up:
//!
//! - [`gaussian`]: Gaussian beliefs, sampling, best-arm probabilities, Gaussian KL
//! - [`bandit`]: the environment and pseudo-regret
//! - [`posterior`]: exact conjugate updates
//! - [`divergence`]: α-divergences, gridded integration, coarse-graining checks
//! - [`approximators`]: approximate posteriors and adversarial constructions
//! - [`policy`]: exact, approximate, forced-exploration and diagnostic policies
//! - [`theory`]: closed-form bounds and curve tables
//! - [`experiment`]: declarative configs, replicated runs, CSV/JSON output
//! - [`validation`]: the invariant suite behind `approx-thompson validate`

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximators;
pub mod bandit;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod policy;
pub mod posterior;
pub mod theory;
pub mod validation;

pub use error::{Error, Result};
