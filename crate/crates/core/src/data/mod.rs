//! Ingestion of raw country-week tables into model-ready panels.

pub mod indicators;
pub mod io;
pub mod labels;
pub mod panel;
pub mod standardize;

use chrono::Datelike;
use std::collections::BTreeMap;

pub use indicators::{build_indicators, Indicators};
pub use io::{AnnualCovariates, CeasefireEvent, CountrySeries, RawEventTable};
pub use labels::apply_label_rule;
pub use panel::CountryPanel;
pub use standardize::{ColumnScale, StandardizationReport};

use crate::error::{Error, Result};
use crate::params::full_design;

/// Continuous covariates, in design order, before centering/scaling.
pub const CONTINUOUS: [&str; 5] = ["v2x", "v2x2", "v2x3", "log_gdp", "log_pop"];

/// A panel whose continuous covariates are still on their raw (lagged,
/// log/polynomial-transformed) scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub country_id: String,
    pub weeks: Vec<chrono::NaiveDate>,
    pub deaths: Vec<u64>,
    pub pre_ceasefire: Vec<bool>,
    pub ceasefire: Vec<bool>,
    /// `n × 5` rows in [`CONTINUOUS`] order.
    pub continuous: Vec<[f64; 5]>,
    pub population: Vec<f64>,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub panels: Vec<CountryPanel>,
    pub report: StandardizationReport,
    pub warnings: Vec<String>,
}

/// Assemble raw panels: indicators, labels and lagged annual covariates.
pub fn assemble(
    events: &RawEventTable,
    ceasefires: &[CeasefireEvent],
    covariates: &[AnnualCovariates],
    warnings: &mut Vec<String>,
) -> Result<Vec<RawPanel>> {
    let mut by_country: BTreeMap<&str, BTreeMap<i32, &AnnualCovariates>> = BTreeMap::new();
    for c in covariates {
        by_country.entry(&c.country_id).or_default().insert(c.year, c);
    }
    for ev in ceasefires {
        if !events.contains_key(&ev.country_id) {
            warnings.push(format!("ceasefire for unknown country `{}` on {} dropped", ev.country_id, ev.effective_date));
        }
    }

    let mut out = Vec::with_capacity(events.len());
    for (country, series) in events {
        let dates: Vec<_> = ceasefires.iter().filter(|e| &e.country_id == country).map(|e| e.effective_date).collect();
        let ind = build_indicators(&dates, &series.weeks);
        for d in &ind.skipped {
            warnings.push(format!("ceasefire for `{country}` on {d} lies outside its week grid; dropped"));
        }
        let annual = by_country
            .get(country.as_str())
            .ok_or_else(|| Error::Invalid(format!("no annual covariates for `{country}`")))?;

        let mut continuous = Vec::with_capacity(series.weeks.len());
        let mut population = Vec::with_capacity(series.weeks.len());
        for week in &series.weeks {
            // previous calendar year, forward-filled across gaps
            let lag_year = week.year() - 1;
            let row = annual.range(..=lag_year).next_back().map(|(_, r)| *r).ok_or_else(|| {
                Error::Invalid(format!("`{country}` has no annual covariates at or before {lag_year} (needed for {week})"))
            })?;
            let v = row.polyarchy;
            continuous.push([v, v * v, v * v * v, row.gdp_per_capita.ln(), row.population.ln()]);
            population.push(row.population);
        }
        out.push(RawPanel {
            country_id: country.clone(),
            weeks: series.weeks.clone(),
            deaths: series.deaths.clone(),
            pre_ceasefire: ind.pre_ceasefire,
            ceasefire: ind.ceasefire,
            continuous,
            population,
            labels: apply_label_rule(&series.deaths),
        });
    }
    Ok(out)
}

/// Center and scale the continuous covariates over all country-weeks pooled,
/// or with a frozen report when one is given.
pub fn standardize_covariates(
    raw: &[RawPanel],
    frozen: Option<&StandardizationReport>,
) -> Result<(Vec<CountryPanel>, StandardizationReport)> {
    let report = match frozen {
        Some(r) => r.clone(),
        None => StandardizationReport::fit(&CONTINUOUS, raw.iter().flat_map(|p| p.continuous.iter().map(|r| &r[..])))?,
    };
    let panels = raw
        .iter()
        .map(|p| {
            let n = p.weeks.len();
            let mut x = Vec::with_capacity(n * 8);
            for k in 0..n {
                let mut row = p.continuous[k];
                report.apply(&mut row);
                x.push(1.0);
                x.push(f64::from(u8::from(p.pre_ceasefire[k])));
                x.push(f64::from(u8::from(p.ceasefire[k])));
                x.extend_from_slice(&row);
            }
            CountryPanel {
                country_id: p.country_id.clone(),
                weeks: p.weeks.clone(),
                deaths: p.deaths.clone(),
                covariates: full_design(),
                x,
                labels: p.labels.clone(),
                population: Some(p.population.clone()),
            }
        })
        .collect();
    Ok((panels, report))
}

/// Full pipeline from the three raw tables.
pub fn ingest(
    events: &RawEventTable,
    ceasefires: &[CeasefireEvent],
    covariates: &[AnnualCovariates],
    frozen: Option<&StandardizationReport>,
) -> Result<IngestOutput> {
    let mut warnings = Vec::new();
    let raw = assemble(events, ceasefires, covariates, &mut warnings)?;
    let (panels, report) = standardize_covariates(&raw, frozen)?;
    Ok(IngestOutput { panels, report, warnings })
}
