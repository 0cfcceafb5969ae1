//! Data-driven reversible-jump MCMC for Bayesian variable selection in probit
//! models with numeric imaging covariates and three-level genotype covariates.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod numerics;
pub mod proposals;
pub mod sampler;

pub use error::{Error, Result};
