use chrono::{Duration, NaiveDate};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::mcmc::quantile_sorted;
use crate::model::{emission_rate_from_mean, sample_nb, transition_matrix, LEAD_WEEKS};
use crate::params::{ParameterSet, NUM_STATES};
use crate::rng::{rng_from_seed, split_seed};
use crate::states::forward_backward;

/// Redraws of a capped week before the count is truncated to the cap.
pub const MAX_CAP_REDRAWS: usize = 1000;
pub const FORECAST_QUANTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSpec {
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Largest admissible weekly count as a share of population.
    pub cap_fraction: Option<f64>,
    /// Future design rows (intercept first, panel scale). `None` carries the
    /// last observed row forward with the ceasefire flags set to 0.
    pub scenario: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast {
    pub country_id: String,
    pub weeks: Vec<NaiveDate>,
    /// `states[m][h]`, 0-based.
    pub states: Vec<Vec<u8>>,
    /// `counts[m][h]`.
    pub counts: Vec<Vec<u64>>,
    pub mean: Vec<f64>,
    /// `quantiles[h][q]` at [`FORECAST_QUANTILES`].
    pub quantiles: Vec<[f64; 5]>,
    pub state_shares: Vec<[f64; NUM_STATES]>,
    /// Weeks truncated to the cap after exhausting the redraws.
    pub truncated: usize,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.weeks.len()
    }

    pub fn replicates(&self) -> usize {
        self.counts.len()
    }
}

fn future_design(panel: &CountryPanel, spec: &ForecastSpec) -> Result<Vec<Vec<f64>>> {
    let d = panel.dim();
    match &spec.scenario {
        Some(rows) => {
            if rows.len() < spec.horizon {
                return Err(Error::Invalid(format!(
                    "missing future covariates for `{}`: scenario has {} weeks, horizon is {}",
                    panel.country_id,
                    rows.len(),
                    spec.horizon
                )));
            }
            if let Some(r) = rows.iter().find(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
                return Err(Error::Invalid(format!("scenario row {r:?} does not have {d} finite covariates")));
            }
            Ok(rows[..spec.horizon].to_vec())
        }
        None => {
            let mut last = panel.x_row(panel.len() - 1).to_vec();
            for flag in ["pre_cf", "cf"] {
                if let Some(j) = panel.covariate_index(flag) {
                    last[j] = 0.0;
                }
            }
            Ok(vec![last; spec.horizon])
        }
    }
}

/// Simulate `replicates` futures: terminal state from the smoothing law,
/// then states from the transition matrices and counts from the emission
/// law with a rolling four-week lag window.
pub fn forecast(params: &ParameterSet, panel: &CountryPanel, spec: &ForecastSpec) -> Result<Forecast> {
    if spec.horizon == 0 || spec.replicates == 0 {
        return Err(Error::Invalid("forecast needs horizon >= 1 and replicates >= 1".into()));
    }
    let n = panel.len();
    if n < LEAD_WEEKS {
        return Err(Error::PanelTooShort { country: panel.country_id.clone(), weeks: n, min: LEAD_WEEKS });
    }
    let xs = future_design(panel, spec)?;
    let limit = match spec.cap_fraction {
        None => None,
        Some(f) if f > 0.0 => {
            let pop = panel
                .population
                .as_ref()
                .and_then(|p| p.last().copied())
                .ok_or_else(|| Error::Invalid(format!("population cap needs population for `{}`", panel.country_id)))?;
            Some((f * pop).floor() as u64)
        }
        Some(f) => return Err(Error::Invalid(format!("cap fraction must be positive, got {f}"))),
    };
    let terminal = *forward_backward(params, panel)?.probs.last().expect("non-empty panel");
    let trans = xs.iter().map(|x| transition_matrix(params, x).map(|m| m.probs)).collect::<Result<Vec<_>>>()?;
    let history: Vec<u64> = panel.deaths[n - LEAD_WEEKS..].to_vec();

    let runs = (0..spec.replicates)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_from_seed(split_seed(spec.seed, m as u64));
            let mut lags = history.clone();
            let mut state = draw(&mut rng, &terminal);
            let mut states = Vec::with_capacity(spec.horizon);
            let mut counts = Vec::with_capacity(spec.horizon);
            let mut truncated = 0;
            for (h, x) in xs.iter().enumerate() {
                state = draw(&mut rng, &trans[h][state]);
                let lag_mean = lags[lags.len() - LEAD_WEEKS..].iter().sum::<u64>() as f64 / LEAD_WEEKS as f64;
                let ctx = emission_rate_from_mean(params, state, lag_mean, x)?;
                let mut y = sample_nb(&mut rng, ctx.r, ctx.p);
                if let Some(cap) = limit {
                    let mut tries = 0;
                    while y > cap && tries < MAX_CAP_REDRAWS {
                        y = sample_nb(&mut rng, ctx.r, ctx.p);
                        tries += 1;
                    }
                    if y > cap {
                        y = cap;
                        truncated += 1;
                    }
                }
                states.push(state as u8);
                counts.push(y);
                lags.push(y);
            }
            Ok((states, counts, truncated))
        })
        .collect::<Result<Vec<_>>>()?;

    let last = *panel.weeks.last().expect("non-empty panel");
    let weeks = (1..=spec.horizon).map(|h| last + Duration::weeks(h as i64)).collect();
    let mut out = Forecast {
        country_id: panel.country_id.clone(),
        weeks,
        states: Vec::with_capacity(spec.replicates),
        counts: Vec::with_capacity(spec.replicates),
        mean: vec![0.0; spec.horizon],
        quantiles: vec![[0.0; 5]; spec.horizon],
        state_shares: vec![[0.0; NUM_STATES]; spec.horizon],
        truncated: 0,
    };
    for (s, c, t) in runs {
        out.states.push(s);
        out.counts.push(c);
        out.truncated += t;
    }
    let m = spec.replicates as f64;
    let mut col = Vec::with_capacity(spec.replicates);
    for h in 0..spec.horizon {
        col.clear();
        col.extend(out.counts.iter().map(|c| c[h] as f64));
        out.mean[h] = col.iter().sum::<f64>() / m;
        col.sort_by(f64::total_cmp);
        out.quantiles[h] = FORECAST_QUANTILES.map(|q| quantile_sorted(&col, q));
        let mut visits = [0usize; NUM_STATES];
        for s in &out.states {
            visits[s[h] as usize] += 1;
        }
        out.state_shares[h] = visits.map(|v| v as f64 / m);
    }
    Ok(out)
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64; NUM_STATES]) -> usize {
    let u = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Scenario file `country_id,week_start,<covariates without intercept>` on
/// the canonical panel scale; returns design rows per country in file order.
pub fn read_scenario<R: Read>(source: R, name: &str, covariates: &[String]) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header: Vec<String> =
        rdr.headers().map_err(|e| Error::csv(name, 1, "-", e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 || header[0] != "country_id" || header[1] != "week_start" {
        return Err(Error::csv(name, 1, "country_id", "expected header country_id,week_start,<covariates>"));
    }
    let mut columns = Vec::with_capacity(covariates.len());
    for c in covariates.iter().skip(1) {
        let j = header
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::csv(name, 1, c, "covariate column missing from scenario"))?;
        columns.push((c, j));
    }
    let mut out: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(name, e.position().map(|p| p.line()).unwrap_or(0), "-", e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let week = rec.get(1).unwrap_or("").trim();
        NaiveDate::parse_from_str(week, "%Y-%m-%d")
            .map_err(|_| Error::csv(name, line, "week_start", format!("`{week}` is not a YYYY-MM-DD date")))?;
        let mut row = vec![1.0];
        for (c, j) in &columns {
            let raw = rec.get(*j).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::csv(name, line, c, format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::csv(name, line, c, "value must be finite"));
            }
            row.push(v);
        }
        out.entry(rec.get(0).unwrap_or("").trim().to_string()).or_default().push(row);
    }
    Ok(out)
}

/// `country_id,week_start,horizon,mean,q025,q25,q50,q75,q975,p1,p2,p3`.
pub fn write_forecast_csv<W: Write>(sink: W, forecasts: &[Forecast]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["country_id", "week_start", "horizon", "mean", "q025", "q25", "q50", "q75", "q975", "p1", "p2", "p3"])
        .map_err(std::io::Error::other)?;
    for f in forecasts {
        for h in 0..f.horizon() {
            let mut row = vec![f.country_id.clone(), f.weeks[h].to_string(), (h + 1).to_string(), f.mean[h].to_string()];
            row.extend(f.quantiles[h].iter().map(|v| v.to_string()));
            row.extend(f.state_shares[h].iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(std::io::Error::other)?;
        }
    }
    w.flush()?;
    Ok(())
}
