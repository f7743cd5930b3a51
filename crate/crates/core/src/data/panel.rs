use chrono::NaiveDate;

use crate::data::standardize::StandardizationReport;
use crate::error::{Error, Result};

/// One country's aligned weekly series, ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryPanel {
    pub country_id: String,
    /// Monday of each week, contiguous.
    pub weeks: Vec<NaiveDate>,
    pub deaths: Vec<u64>,
    /// Covariate names; the first is always `intercept`.
    pub covariates: Vec<String>,
    /// Row-major `n × d` design.
    pub x: Vec<f64>,
    /// `true` where the week is fixed to state 1.
    pub labels: Vec<bool>,
    /// Raw population per week, when known (needed for count caps).
    pub population: Option<Vec<f64>>,
}

impl CountryPanel {
    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.len()
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.x[k * d..(k + 1) * d]
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.deaths.len();
        let d = self.dim();
        if self.covariates.first().map(String::as_str) != Some("intercept") {
            return Err(Error::Invalid(format!("panel `{}`: first covariate must be intercept", self.country_id)));
        }
        if self.weeks.len() != n || self.labels.len() != n || self.x.len() != n * d {
            return Err(Error::Invalid(format!("panel `{}`: inconsistent series lengths", self.country_id)));
        }
        if let Some(pop) = &self.population {
            if pop.len() != n {
                return Err(Error::Invalid(format!("panel `{}`: population length mismatch", self.country_id)));
            }
        }
        for w in self.weeks.windows(2) {
            if (w[1] - w[0]).num_days() != 7 {
                return Err(Error::Invalid(format!(
                    "panel `{}`: weeks {} and {} are not consecutive",
                    self.country_id, w[0], w[1]
                )));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("panel `{}`: non-finite covariate", self.country_id)));
        }
        Ok(())
    }

    /// Mean of the four counts preceding week `k` (`k >= 4`).
    pub fn lag_mean(&self, k: usize) -> f64 {
        self.deaths[k - 4..k].iter().sum::<u64>() as f64 / 4.0
    }

    /// Recover raw population from the standardized `log_pop` column.
    pub fn attach_population(&mut self, report: &StandardizationReport) -> Result<()> {
        let j = self
            .covariate_index("log_pop")
            .ok_or_else(|| Error::Invalid(format!("panel `{}` has no log_pop column", self.country_id)))?;
        let pop = (0..self.len())
            .map(|k| {
                report
                    .unscale("log_pop", self.x_row(k)[j])
                    .map(f64::exp)
                    .ok_or_else(|| Error::Invalid("report has no log_pop column".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.population = Some(pop);
        Ok(())
    }
}
