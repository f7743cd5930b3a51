//! Transition, emission and likelihood building blocks.

pub mod emission;
pub mod likelihood;
pub mod transition;

pub use emission::{emission_rate, emission_rate_from_mean, nb_log_pmf, sample_nb, EmissionContext};
pub use likelihood::{
    brute_force_log_likelihood, marginal_log_likelihood, total_log_likelihood, Factors, PanelData, LEAD_WEEKS,
    MAX_ENUMERATION_WEEKS, MIN_WEEKS,
};
pub use transition::{transition_matrix, Matrix3, TransitionMatrix};
