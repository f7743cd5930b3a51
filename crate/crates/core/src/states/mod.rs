//! Latent-state inference at fixed parameters: exact smoothing, the pairwise
//! Gibbs state sampler, covariate-only transition curves and forecasting.

mod curves;
mod forecast;
mod sampler;
mod smoothing;

pub use curves::{probability_curves, write_curves_csv, ProbabilityCurves};
pub use forecast::{forecast, read_scenario, write_forecast_csv, Forecast, ForecastSpec, FORECAST_QUANTILES, MAX_CAP_REDRAWS};
pub use sampler::{
    averaged_state_posterior, sample_all, sample_state_proportions, state_space_sampler, BURNIN_FRACTION,
};
pub use smoothing::{forward_backward, smooth, viterbi, viterbi_path};

use chrono::NaiveDate;
use serde::Serialize;
use std::io::Write;

use crate::error::Result;
use crate::params::NUM_STATES;

/// Per-week state probabilities for one country.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePosterior {
    pub country_id: String,
    pub weeks: Vec<NaiveDate>,
    pub probs: Vec<[f64; NUM_STATES]>,
    /// Sampler sweeps (0 for exact smoothing).
    pub sweeps: usize,
    pub seed: Option<u64>,
}

/// `country_id,week_start,p1,p2,p3`.
pub fn write_states_csv<W: Write>(sink: W, posteriors: &[StatePosterior]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["country_id", "week_start", "p1", "p2", "p3"]).map_err(std::io::Error::other)?;
    for post in posteriors {
        for (week, p) in post.weeks.iter().zip(&post.probs) {
            w.write_record([
                post.country_id.clone(),
                week.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
            ])
            .map_err(std::io::Error::other)?;
        }
    }
    w.flush()?;
    Ok(())
}
