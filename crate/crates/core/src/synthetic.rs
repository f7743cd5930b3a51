//! Synthetic panels from known parameters and the credible-set coverage study.

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use crate::data::{
    self, apply_label_rule, AnnualCovariates, CeasefireEvent, CountryPanel, CountrySeries, RawEventTable, StandardizationReport,
};
use crate::error::{Error, Result};
use crate::mcmc::{fit_target, quantile_sorted, McmcConfig};
use crate::model::{emission_rate_from_mean, sample_nb, transition_matrix, LEAD_WEEKS};
use crate::params::{coordinate_names, ParameterSet, NUM_STATES, TRANSITION_LABELS};
use crate::posterior::{PosteriorTarget, PriorSpec};
use crate::rng::{rng_from_seed, split_seed};

pub const DEFAULT_CAP_FRACTION: f64 = 0.0006;
pub const DEFAULT_COUNTRY_RETRIES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub params: ParameterSet,
    /// Largest admissible weekly count as a share of population.
    pub cap_fraction: f64,
    pub max_country_retries: usize,
}

impl GeneratorSpec {
    pub fn new(params: ParameterSet) -> Self {
        GeneratorSpec { params, cap_fraction: DEFAULT_CAP_FRACTION, max_country_retries: DEFAULT_COUNTRY_RETRIES }
    }
}

/// A generated country with its latent path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCountry {
    pub panel: CountryPanel,
    /// 0-based states.
    pub states: Vec<u8>,
    /// Attempts used, including the accepted one.
    pub attempts: usize,
}

/// Counts for a skeleton's covariates, labels left unset. A country whose
/// counts break the population cap is regenerated whole.
pub fn simulate_country(spec: &GeneratorSpec, skeleton: &CountryPanel, seed: u64) -> Result<CountryPanel> {
    simulate_country_detailed(spec, skeleton, seed).map(|s| s.panel)
}

pub fn simulate_country_detailed(spec: &GeneratorSpec, skeleton: &CountryPanel, seed: u64) -> Result<SimulatedCountry> {
    if !(spec.cap_fraction > 0.0) {
        return Err(Error::Invalid(format!("cap fraction must be positive, got {}", spec.cap_fraction)));
    }
    let params = &spec.params;
    if skeleton.covariates != params.covariates() {
        return Err(Error::Invalid(format!("skeleton `{}` covariates do not match the parameters", skeleton.country_id)));
    }
    let n = skeleton.len();
    let population = skeleton
        .population
        .as_ref()
        .filter(|p| p.len() == n)
        .ok_or_else(|| Error::Invalid(format!("skeleton `{}` has no weekly population", skeleton.country_id)))?;
    let caps: Vec<f64> = population.iter().map(|p| spec.cap_fraction * p).collect();
    let trans = (1..n)
        .map(|k| transition_matrix(params, skeleton.x_row(k)).map(|m| m.probs))
        .collect::<Result<Vec<_>>>()?;
    let pi = params.pi();

    for attempt in 0..spec.max_country_retries {
        let mut rng = rng_from_seed(split_seed(seed, attempt as u64));
        let mut states = Vec::with_capacity(n);
        let mut deaths: Vec<u64> = Vec::with_capacity(n);
        let mut ok = true;
        for k in 0..n {
            let s = if k == 0 { draw(&mut rng, &pi) } else { draw(&mut rng, &trans[k - 1][states[k - 1] as usize]) };
            let lag_mean = if k >= LEAD_WEEKS { deaths[k - 4..k].iter().sum::<u64>() as f64 / 4.0 } else { 0.0 };
            let y = if k < LEAD_WEEKS {
                sample_nb(&mut rng, params.a()[s], params.p())
            } else {
                match emission_rate_from_mean(params, s, lag_mean, skeleton.x_row(k)) {
                    Ok(ctx) => sample_nb(&mut rng, ctx.r, ctx.p),
                    Err(_) => u64::MAX,
                }
            };
            if y as f64 > caps[k] {
                ok = false;
                break;
            }
            states.push(s as u8);
            deaths.push(y);
        }
        if ok {
            let panel = CountryPanel { deaths, labels: vec![false; n], ..skeleton.clone() };
            return Ok(SimulatedCountry { panel, states, attempts: attempt + 1 });
        }
    }
    Err(Error::RetryExhausted { country: skeleton.country_id.clone(), attempts: spec.max_country_retries })
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

/// Fix state 1 on weeks meeting the zero-death rule (same rule as ingestion).
pub fn apply_synthetic_labels(mut panel: CountryPanel) -> CountryPanel {
    panel.labels = apply_label_rule(&panel.deaths);
    panel
}

/// Generate and label every skeleton; country `i` uses stream `i` of `seed`.
pub fn simulate_panels(spec: &GeneratorSpec, skeletons: &[CountryPanel], seed: u64) -> Result<Vec<CountryPanel>> {
    Ok(simulate_panels_detailed(spec, skeletons, seed)?.into_iter().map(|s| s.panel).collect())
}

/// As [`simulate_panels`], keeping the latent paths.
pub fn simulate_panels_detailed(spec: &GeneratorSpec, skeletons: &[CountryPanel], seed: u64) -> Result<Vec<SimulatedCountry>> {
    skeletons
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut sim = simulate_country_detailed(spec, s, split_seed(seed, i as u64))?;
            sim.panel = apply_synthetic_labels(sim.panel);
            Ok(sim)
        })
        .collect()
}

/// `country_id,week_start,state,attempts` with 1-based states.
pub fn write_true_states_csv<W: Write>(sink: W, sims: &[SimulatedCountry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["country_id", "week_start", "state", "attempts"]).map_err(std::io::Error::other)?;
    for sim in sims {
        for (week, s) in sim.panel.weeks.iter().zip(&sim.states) {
            w.write_record([
                sim.panel.country_id.clone(),
                week.to_string(),
                (s + 1).to_string(),
                sim.attempts.to_string(),
            ])
            .map_err(std::io::Error::other)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shape of the synthetic covariate skeletons.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonSpec {
    pub countries: usize,
    pub weeks: usize,
    pub start: NaiveDate,
    /// Mean number of ceasefires per country-year.
    pub ceasefires_per_year: f64,
    pub seed: u64,
}

impl Default for SkeletonSpec {
    fn default() -> Self {
        SkeletonSpec {
            countries: 10,
            weeks: 200,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
            ceasefires_per_year: 0.8,
            seed: 1,
        }
    }
}

/// Raw tables resembling the real inputs: zero-death event series, random
/// ceasefire dates, and annual polyarchy / GDP per capita / population
/// random walks.
pub fn skeleton_tables(spec: &SkeletonSpec) -> Result<(RawEventTable, Vec<CeasefireEvent>, Vec<AnnualCovariates>)> {
    if spec.countries == 0 || spec.weeks < LEAD_WEEKS + 1 {
        return Err(Error::Invalid("skeletons need at least one country and five weeks".into()));
    }
    if spec.start.weekday() != chrono::Weekday::Mon {
        return Err(Error::Invalid(format!("skeleton start {} is not a Monday", spec.start)));
    }
    let weeks: Vec<NaiveDate> = (0..spec.weeks).map(|k| spec.start + Duration::weeks(k as i64)).collect();
    let first_year = spec.start.year() - 1;
    let last_year = weeks[weeks.len() - 1].year();
    let years = spec.weeks as f64 / 52.18;
    let std: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");

    let mut events = RawEventTable::new();
    let mut ceasefires = Vec::new();
    let mut annual = Vec::new();
    for i in 0..spec.countries {
        let mut rng = rng_from_seed(split_seed(spec.seed, i as u64));
        let id = format!("S{:03}", i + 1);
        events.insert(id.clone(), CountrySeries { weeks: weeks.clone(), deaths: vec![0; spec.weeks] });

        let mean = spec.ceasefires_per_year * years;
        let count = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize } else { 0 };
        for _ in 0..count {
            let day = rng.random_range(0..spec.weeks as i64 * 7);
            ceasefires.push(CeasefireEvent { country_id: id.clone(), effective_date: spec.start + Duration::days(day) });
        }

        let mut v2x: f64 = rng.random_range(0.1..0.9);
        let mut log_gdp: f64 = 7.5 + 1.0 * std.sample(&mut rng);
        let mut log_pop: f64 = 16.0 + 1.2 * std.sample(&mut rng);
        for year in first_year..=last_year {
            annual.push(AnnualCovariates {
                country_id: id.clone(),
                year,
                polyarchy: v2x,
                gdp_per_capita: log_gdp.exp(),
                population: log_pop.exp(),
            });
            v2x = (v2x + 0.05 * std.sample(&mut rng)).clamp(0.01, 0.99);
            log_gdp += 0.02 + 0.05 * std.sample(&mut rng);
            log_pop += 0.02;
        }
    }
    ceasefires.sort_by(|a, b| (&a.country_id, a.effective_date).cmp(&(&b.country_id, b.effective_date)));
    Ok((events, ceasefires, annual))
}

/// Skeleton panels on `covariates` (a subset of the full design, intercept
/// first), produced by the ingestion pipeline from [`skeleton_tables`].
pub fn generate_skeletons(spec: &SkeletonSpec, covariates: &[String]) -> Result<(Vec<CountryPanel>, StandardizationReport)> {
    let (events, ceasefires, annual) = skeleton_tables(spec)?;
    let out = data::ingest(&events, &ceasefires, &annual, None)?;
    let panels = out.panels.iter().map(|p| select_covariates(p, covariates)).collect::<Result<_>>()?;
    Ok((panels, out.report))
}

/// Keep only the named design columns, in the given order.
pub fn select_covariates(panel: &CountryPanel, covariates: &[String]) -> Result<CountryPanel> {
    let idx = covariates
        .iter()
        .map(|c| {
            panel
                .covariate_index(c)
                .ok_or_else(|| Error::Invalid(format!("panel `{}` has no covariate `{c}`", panel.country_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::with_capacity(panel.len() * idx.len());
    for k in 0..panel.len() {
        let row = panel.x_row(k);
        x.extend(idx.iter().map(|&j| row[j]));
    }
    Ok(CountryPanel { covariates: covariates.to_vec(), x, ..panel.clone() })
}

#[derive(Debug, Clone)]
pub struct CoverageSpec {
    pub generator: GeneratorSpec,
    pub skeletons: Vec<CountryPanel>,
    pub replications: usize,
    pub seed: u64,
    pub prior: PriorSpec,
    /// Sampler settings; the seed is replaced per replication.
    pub fit: McmcConfig,
    /// Central credible level.
    pub level: f64,
    /// Start each chain at the generating values instead of a random
    /// initialization.
    pub start_at_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    /// Intervals containing the truth, per coordinate.
    pub covered: Vec<usize>,
    /// Replications that produced a fit.
    pub replications: usize,
    pub level: f64,
    pub failures: Vec<ReplicationFailure>,
    /// `intervals[rep][coordinate] = (lower, upper)` for successful replications.
    pub intervals: Vec<Vec<(f64, f64)>>,
    pub medians: Vec<Vec<f64>>,
}

impl CoverageReport {
    pub fn proportion(&self, j: usize) -> f64 {
        self.covered[j] as f64 / self.replications as f64
    }

    /// Coverage in a parameter × covariate grid: one row per transition and
    /// emission slope, then the scalar parameters in the first column.
    pub fn write_table_csv<W: Write>(&self, sink: W, covariates: &[String]) -> Result<()> {
        let d = covariates.len();
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["parameter".to_string()];
        header.extend(covariates.iter().cloned());
        w.write_record(&header).map_err(std::io::Error::other)?;
        let fmt = |j: usize| format!("{:.4}", self.proportion(j));
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        for (r, label) in TRANSITION_LABELS.iter().enumerate() {
            rows.push((format!("zeta[{label}]"), (0..d).map(|k| fmt(r * d + k)).collect()));
        }
        for (b, label) in ["beta[state2]", "beta[state3]"].iter().enumerate() {
            rows.push((label.to_string(), (0..d).map(|k| fmt(6 * d + b * d + k)).collect()));
        }
        for (i, name) in ["a1", "a2", "a3", "c", "pi2", "pi3"].iter().enumerate() {
            let mut cells = vec![fmt(8 * d + i)];
            cells.resize(d, String::new());
            rows.push((name.to_string(), cells));
        }
        for (name, cells) in rows {
            let mut rec = vec![name];
            rec.extend(cells);
            w.write_record(&rec).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generate, label and fit `replications` data sets; record whether each
/// central credible interval (constrained coordinates) contains the truth.
pub fn coverage_study(spec: &CoverageSpec) -> Result<CoverageReport> {
    if spec.replications == 0 {
        return Err(Error::Invalid("coverage study needs at least one replication".into()));
    }
    if !(spec.level > 0.0 && spec.level < 1.0) {
        return Err(Error::Invalid(format!("credible level must lie in (0, 1), got {}", spec.level)));
    }
    let truth_params = &spec.generator.params;
    let covariates = truth_params.covariates().to_vec();
    let truth = truth_params.constrained_values();
    let tail = (1.0 - spec.level) / 2.0;

    let runs: Vec<Result<(Vec<(f64, f64)>, Vec<f64>)>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = split_seed(spec.seed, r as u64);
            let panels = simulate_panels(&spec.generator, &spec.skeletons, rep_seed)?;
            let target = PosteriorTarget::new(covariates.clone(), &panels, spec.prior.clone())?;
            let config = McmcConfig { seed: split_seed(rep_seed, u64::MAX), ..spec.fit.clone() };
            let start = spec.start_at_truth.then_some(truth_params);
            let draws = fit_target(&target, &config, start)?;
            let constrained = draws.constrained_draws();
            let mut intervals = Vec::with_capacity(truth.len());
            let mut medians = Vec::with_capacity(truth.len());
            let mut col = Vec::with_capacity(constrained.len());
            for j in 0..truth.len() {
                col.clear();
                col.extend(constrained.iter().map(|d| d[j]));
                col.sort_by(f64::total_cmp);
                intervals.push((quantile_sorted(&col, tail), quantile_sorted(&col, 1.0 - tail)));
                medians.push(quantile_sorted(&col, 0.5));
            }
            Ok((intervals, medians))
        })
        .collect();

    let mut report = CoverageReport {
        names: coordinate_names(&covariates),
        truth: truth.clone(),
        covered: vec![0; truth.len()],
        replications: 0,
        level: spec.level,
        failures: Vec::new(),
        intervals: Vec::new(),
        medians: Vec::new(),
    };
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok((intervals, medians)) => {
                for (j, &(lo, hi)) in intervals.iter().enumerate() {
                    if lo <= truth[j] && truth[j] <= hi {
                        report.covered[j] += 1;
                    }
                }
                report.replications += 1;
                report.intervals.push(intervals);
                report.medians.push(medians);
            }
            Err(e) => report.failures.push(ReplicationFailure { replication: r, message: e.to_string() }),
        }
    }
    if report.replications == 0 {
        return Err(Error::Numerical(format!("all {} replications failed", spec.replications)));
    }
    Ok(report)
}
