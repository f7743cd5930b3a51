//! Bayesian autoregressive hidden Markov model for weekly count panels.
//!
//! Three latent regimes (non-violent, stable violence, intensified violence)
//! evolve as a covariate-driven Markov chain; weekly counts follow a
//! negative-binomial law whose size grows with the mean of the previous four
//! weeks in the violent regimes. The crate covers ingestion, the exact
//! marginal likelihood, posterior sampling, latent-state inference,
//! forecasting and synthetic-data studies.

pub mod data;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod params;
pub mod posterior;
pub mod rng;
pub mod states;
pub mod synthetic;

#[cfg(test)]
pub(crate) mod testutil;

pub use data::{CountryPanel, StandardizationReport};
pub use error::{Error, ErrorCategory, Result};
pub use model::{EmissionContext, TransitionMatrix};
pub use params::{ParameterSet, Theta};
