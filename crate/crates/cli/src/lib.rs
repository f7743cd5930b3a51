//! `cfhmm` command-line pipeline: every subcommand reads one TOML run
//! configuration, delegates to `cfhmm-core`, writes its artifacts into the
//! output directory and records a manifest that `replay` can re-execute.

pub mod config;
pub mod manifest;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cfhmm_core::data::{self, io as panel_io, CountryPanel, StandardizationReport};
use cfhmm_core::mcmc::{self, McmcConfig};
use cfhmm_core::params::num_coordinates;
use cfhmm_core::posterior::PriorSpec;
use cfhmm_core::rng::split_seed;
use cfhmm_core::states::{self, ForecastSpec};
use cfhmm_core::synthetic::{self, CoverageSpec, GeneratorSpec, SkeletonSpec};
use cfhmm_core::{Error, ErrorCategory, ParameterSet};

pub use config::RunConfig;
pub use manifest::Manifest;

use config::{require, PUBLISHED};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::RetryBudget => 4,
            },
            CliError::Mismatch(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "numerical",
            _ => "retry_budget",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() } })
            .to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "cfhmm", version, about = "Hidden Markov model for weekly conflict-death panels")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw event, ceasefire and covariate tables -> canonical panels + scaling report.
    Ingest(RunArgs),
    /// Posterior sampling: draws, summary, trace and diagnostics.
    Fit(RunArgs),
    /// Smoothed state probabilities per country-week.
    States(RunArgs),
    /// Covariate-driven transition probabilities per country-week.
    Curves(RunArgs),
    /// Simulated death-count forecasts.
    Forecast(RunArgs),
    /// Synthetic panels from known parameters.
    Simulate(RunArgs),
    /// Credible-set coverage study on synthetic panels.
    Coverage(RunArgs),
    /// Re-run a recorded command and verify its output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `manifest-<command>.json` written by an earlier run.
    pub manifest: PathBuf,
    /// Where to write the rerun (default: `replay-<command>` next to the manifest).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Subcommands that produce artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Ingest,
    Fit,
    States,
    Curves,
    Forecast,
    Simulate,
    Coverage,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Ingest => "ingest",
            Step::Fit => "fit",
            Step::States => "states",
            Step::Curves => "curves",
            Step::Forecast => "forecast",
            Step::Simulate => "simulate",
            Step::Coverage => "coverage",
        }
    }
}

/// What a step produced: file names inside the output directory and warnings.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (step, args) = match cli.command {
        Command::Ingest(a) => (Step::Ingest, a),
        Command::Fit(a) => (Step::Fit, a),
        Command::States(a) => (Step::States, a),
        Command::Curves(a) => (Step::Curves, a),
        Command::Forecast(a) => (Step::Forecast, a),
        Command::Simulate(a) => (Step::Simulate, a),
        Command::Coverage(a) => (Step::Coverage, a),
        Command::Replay(a) => return replay(&a.manifest, a.out_dir.as_deref()).map(|_| ()),
    };
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = args.out_dir {
        cfg.output_dir = std::path::absolute(&dir)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    execute(step, &cfg).map(|_| ())
}

/// Validate, run one step and write its manifest.
pub fn execute(step: Step, cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let inputs = manifest::hash_files(&cfg.input_paths())?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let out = match step {
        Step::Ingest => cmd_ingest(cfg)?,
        Step::Fit => cmd_fit(cfg)?,
        Step::States => cmd_states(cfg)?,
        Step::Curves => cmd_curves(cfg)?,
        Step::Forecast => cmd_forecast(cfg)?,
        Step::Simulate => cmd_simulate(cfg)?,
        Step::Coverage => cmd_coverage(cfg)?,
    };
    let outputs = manifest::hash_outputs(&cfg.output_dir, &out.files)?;
    let m = Manifest::new(step, cfg.clone(), inputs, outputs, out.warnings);
    m.save(&cfg.output_dir.join(Manifest::file_name(step)))?;
    Ok(m)
}

/// Re-execute a manifest into a fresh directory and compare output hashes.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<Manifest, CliError> {
    let recorded = Manifest::load(manifest_path)?;
    let mut cfg = recorded.config.clone();
    cfg.output_dir = match out_dir {
        Some(d) => std::path::absolute(d)?,
        None => {
            let base = manifest_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            std::path::absolute(base)?.join(format!("replay-{}", recorded.command.name()))
        }
    };
    if cfg.output_dir == recorded.config.output_dir {
        return Err(CliError::Config("replay output directory must differ from the recorded one".into()));
    }
    let current = manifest::hash_files(&cfg.input_paths())?;
    if current != recorded.inputs {
        return Err(CliError::Config("input files changed since the manifest was written".into()));
    }
    let rerun = execute(recorded.command, &cfg)?;
    if rerun.outputs != recorded.outputs {
        let differing: Vec<&str> = recorded
            .outputs
            .iter()
            .filter(|(k, v)| rerun.outputs.get(*k) != Some(v))
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    Ok(rerun)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn load_params(cfg: &RunConfig) -> Result<ParameterSet, CliError> {
    match require(&cfg.params, "params")?.as_str() {
        PUBLISHED => Ok(ParameterSet::published_means()),
        path => Ok(ParameterSet::load(Path::new(path))?),
    }
}

fn load_report(cfg: &RunConfig) -> Result<Option<StandardizationReport>, CliError> {
    cfg.data.report.as_deref().map(StandardizationReport::load).transpose().map_err(Into::into)
}

/// Canonical panels, with population recovered when a report is configured.
fn load_full_panels(cfg: &RunConfig) -> Result<Vec<CountryPanel>, CliError> {
    let path = require(&cfg.data.panels, "data.panels")?;
    let mut panels = panel_io::load_panels(path)?;
    if panels.is_empty() {
        return Err(CliError::Config(format!("{} holds no panels", path.display())));
    }
    if let Some(report) = load_report(cfg)? {
        for p in &mut panels {
            p.attach_population(&report)?;
        }
    }
    for p in &panels {
        p.validate()?;
    }
    Ok(panels)
}

fn restrict(panels: &[CountryPanel], covariates: &[String]) -> Result<Vec<CountryPanel>, CliError> {
    panels.iter().map(|p| synthetic::select_covariates(p, covariates).map_err(Into::into)).collect()
}

fn design(cfg: &RunConfig, panels: &[CountryPanel]) -> Vec<String> {
    cfg.data.design.clone().unwrap_or_else(|| panels[0].covariates.clone())
}

fn prior(cfg: &RunConfig, d: usize) -> Result<PriorSpec, CliError> {
    Ok(PriorSpec::uniform(cfg.prior.sd, num_coordinates(d))?)
}

fn mcmc_config(cfg: &RunConfig) -> McmcConfig {
    McmcConfig { seed: cfg.seed, ..cfg.mcmc.clone() }
}

fn cmd_ingest(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let events = data::io::read_events(require(&cfg.data.events, "data.events")?)?;
    let ceasefires = data::io::read_ceasefires(require(&cfg.data.ceasefires, "data.ceasefires")?)?;
    let covariates = data::io::read_covariates(require(&cfg.data.covariates, "data.covariates")?)?;
    let frozen = load_report(cfg)?;
    let out = data::ingest(&events, &ceasefires, &covariates, frozen.as_ref())?;
    let dir = &cfg.output_dir;
    panel_io::write_panels(create(dir, "panels.csv")?, &out.panels)?;
    out.report.save(&dir.join("report.json"))?;
    Ok(Outputs { files: vec!["panels.csv".into(), "report.json".into()], warnings: out.warnings })
}

fn cmd_fit(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let full = load_full_panels(cfg)?;
    let covariates = design(cfg, &full);
    let panels = restrict(&full, &covariates)?;
    let draws = mcmc::fit(&panels, &prior(cfg, covariates.len())?, &mcmc_config(cfg))?;
    let dir = &cfg.output_dir;
    let mut files = vec!["draws.csv".to_string(), "summary.json".into(), "trace.csv".into(), "posterior_mean.json".into()];
    let mut warnings = Vec::new();
    draws.write_csv(create(dir, "draws.csv")?)?;
    write_json(dir, "summary.json", &draws.summary_json())?;
    mcmc::write_trace_csv(&draws, create(dir, "trace.csv")?)?;
    draws.posterior_mean()?.save(&dir.join("posterior_mean.json"))?;
    match mcmc::diagnostics(&draws) {
        Ok(report) => {
            if !report.flagged.is_empty() {
                warnings.push(format!("convergence flags: {}", report.flagged.join(", ")));
            }
            write_json(dir, "diagnostics.json", &report)?;
            files.push("diagnostics.json".into());
        }
        Err(e) => warnings.push(format!("diagnostics skipped: {e}")),
    }
    Ok(Outputs { files, warnings })
}

fn cmd_states(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = load_params(cfg)?;
    let panels = restrict(&load_full_panels(cfg)?, params.covariates())?;
    let posteriors = if cfg.states.exact {
        panels.iter().map(|p| states::forward_backward(&params, p)).collect::<Result<Vec<_>, _>>()?
    } else {
        states::sample_all(&params, &panels, cfg.states.sweeps, cfg.seed)?
    };
    states::write_states_csv(create(&cfg.output_dir, "states.csv")?, &posteriors)?;
    Ok(Outputs { files: vec!["states.csv".into()], warnings: vec![] })
}

fn cmd_curves(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = load_params(cfg)?;
    let panels = restrict(&load_full_panels(cfg)?, params.covariates())?;
    let curves = panels.iter().map(|p| states::probability_curves(&params, p)).collect::<Result<Vec<_>, _>>()?;
    states::write_curves_csv(create(&cfg.output_dir, "curves.csv")?, &curves)?;
    Ok(Outputs { files: vec!["curves.csv".into()], warnings: vec![] })
}

fn cmd_forecast(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = load_params(cfg)?;
    let full = load_full_panels(cfg)?;
    if cfg.forecast.cap_fraction.is_some() && full.iter().any(|p| p.population.is_none()) {
        return Err(CliError::Config("forecast.cap_fraction needs data.report to recover population".into()));
    }
    let panels = restrict(&full, params.covariates())?;
    let mut scenarios: BTreeMap<String, Vec<Vec<f64>>> = match &cfg.forecast.scenario {
        Some(path) => {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            states::read_scenario(File::open(path)?, &name, params.covariates())?
        }
        None => BTreeMap::new(),
    };
    let mut warnings = Vec::new();
    let mut forecasts = Vec::with_capacity(panels.len());
    for (i, panel) in panels.iter().enumerate() {
        let spec = ForecastSpec {
            horizon: cfg.forecast.horizon,
            replicates: cfg.forecast.replicates,
            seed: split_seed(cfg.seed, i as u64),
            cap_fraction: cfg.forecast.cap_fraction,
            scenario: scenarios.remove(&panel.country_id),
        };
        let f = states::forecast(&params, panel, &spec)?;
        if f.truncated > 0 {
            warnings.push(format!("`{}`: {} simulated weeks truncated to the population cap", f.country_id, f.truncated));
        }
        forecasts.push(f);
    }
    for country in scenarios.keys() {
        warnings.push(format!("scenario rows for unknown country `{country}` ignored"));
    }
    states::write_forecast_csv(create(&cfg.output_dir, "forecast.csv")?, &forecasts)?;
    Ok(Outputs { files: vec!["forecast.csv".into()], warnings })
}

/// Skeleton panels (with population) and their scaling report.
fn skeletons(cfg: &RunConfig, covariates: &[String]) -> Result<(Vec<CountryPanel>, StandardizationReport), CliError> {
    let sim = &cfg.simulate;
    if sim.skeleton_from_panels {
        let full = load_full_panels(cfg)?;
        let report = load_report(cfg)?
            .ok_or_else(|| CliError::Config("simulate.skeleton_from_panels needs data.report".into()))?;
        Ok((restrict(&full, covariates)?, report))
    } else {
        let spec = SkeletonSpec {
            countries: sim.countries,
            weeks: sim.weeks,
            start: sim.start,
            ceasefires_per_year: sim.ceasefires_per_year,
            seed: split_seed(cfg.seed, 0),
        };
        Ok(synthetic::generate_skeletons(&spec, covariates)?)
    }
}

fn generator(cfg: &RunConfig, params: ParameterSet) -> GeneratorSpec {
    GeneratorSpec {
        cap_fraction: cfg.simulate.cap_fraction,
        max_country_retries: cfg.simulate.max_country_retries,
        ..GeneratorSpec::new(params)
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = load_params(cfg)?;
    let (skel, report) = skeletons(cfg, params.covariates())?;
    let sims = synthetic::simulate_panels_detailed(&generator(cfg, params), &skel, split_seed(cfg.seed, 1))?;
    let panels: Vec<CountryPanel> = sims.iter().map(|s| s.panel.clone()).collect();
    let dir = &cfg.output_dir;
    panel_io::write_panels(create(dir, "panels.csv")?, &panels)?;
    synthetic::write_true_states_csv(create(dir, "true_states.csv")?, &sims)?;
    report.save(&dir.join("report.json"))?;
    let warnings = sims
        .iter()
        .filter(|s| s.attempts > 1)
        .map(|s| format!("`{}` regenerated {} times after cap breaches", s.panel.country_id, s.attempts - 1))
        .collect();
    Ok(Outputs { files: vec!["panels.csv".into(), "true_states.csv".into(), "report.json".into()], warnings })
}

fn cmd_coverage(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = load_params(cfg)?;
    let covariates = params.covariates().to_vec();
    let (skel, _) = skeletons(cfg, &covariates)?;
    let spec = CoverageSpec {
        prior: prior(cfg, covariates.len())?,
        skeletons: skel,
        replications: cfg.coverage.replications,
        seed: split_seed(cfg.seed, 2),
        fit: cfg.mcmc.clone(),
        level: cfg.coverage.level,
        start_at_truth: cfg.coverage.start_at_truth,
        generator: generator(cfg, params),
    };
    let report = synthetic::coverage_study(&spec)?;
    let dir = &cfg.output_dir;
    report.write_table_csv(create(dir, "coverage.csv")?, &covariates)?;
    write_json(dir, "coverage.json", &report)?;
    let warnings = report.failures.iter().map(|f| format!("replication {} failed: {}", f.replication, f.message)).collect();
    Ok(Outputs { files: vec!["coverage.csv".into(), "coverage.json".into()], warnings })
}
