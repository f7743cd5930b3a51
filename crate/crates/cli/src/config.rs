//! Run configuration: one TOML file per run, paths relative to the file.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use cfhmm_core::mcmc::McmcConfig;
use cfhmm_core::posterior::DEFAULT_PRIOR_SD;
use cfhmm_core::synthetic::{DEFAULT_CAP_FRACTION, DEFAULT_COUNTRY_RETRIES};

use crate::CliError;

/// Parameter source keyword for the published posterior means.
pub const PUBLISHED: &str = "published";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Master seed; every random stream of a run derives from it.
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Parameter JSON path, or `"published"`.
    #[serde(default)]
    pub params: Option<String>,
    #[serde(default)]
    pub states: StatesConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub coverage: CoverageConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub events: Option<PathBuf>,
    pub ceasefires: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    /// Canonical panel CSV.
    pub panels: Option<PathBuf>,
    /// Standardization report: frozen scaling for ingest, population for caps.
    pub report: Option<PathBuf>,
    /// Design subset (intercept first); all panel columns when absent.
    pub design: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { sd: DEFAULT_PRIOR_SD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatesConfig {
    pub sweeps: usize,
    /// Exact smoothing instead of the state sampler.
    pub exact: bool,
}

impl Default for StatesConfig {
    fn default() -> Self {
        StatesConfig { sweeps: 50_000, exact: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub replicates: usize,
    /// `None` disables the population cap.
    pub cap_fraction: Option<f64>,
    /// Future covariates; carry-forward with zero flags when absent.
    pub scenario: Option<PathBuf>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig { horizon: 26, replicates: 1000, cap_fraction: Some(DEFAULT_CAP_FRACTION), scenario: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Use `data.panels` as covariate skeletons instead of generating them.
    pub skeleton_from_panels: bool,
    pub countries: usize,
    pub weeks: usize,
    pub start: NaiveDate,
    pub ceasefires_per_year: f64,
    pub cap_fraction: f64,
    pub max_country_retries: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let s = cfhmm_core::synthetic::SkeletonSpec::default();
        SimulateConfig {
            skeleton_from_panels: false,
            countries: s.countries,
            weeks: s.weeks,
            start: s.start,
            ceasefires_per_year: s.ceasefires_per_year,
            cap_fraction: DEFAULT_CAP_FRACTION,
            max_country_retries: DEFAULT_COUNTRY_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub replications: usize,
    pub level: f64,
    pub start_at_truth: bool,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig { replications: 30, level: 0.95, start_at_truth: false }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Ok(cfg.resolved(base))
    }

    /// Make every relative path absolute against `base`.
    pub fn resolved(mut self, base: &Path) -> Self {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.data.events,
            &mut self.data.ceasefires,
            &mut self.data.covariates,
            &mut self.data.panels,
            &mut self.data.report,
            &mut self.forecast.scenario,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(p) = self.params.as_mut().filter(|p| p.as_str() != PUBLISHED) {
            let path = PathBuf::from(&*p);
            if path.is_relative() {
                *p = base.join(path).display().to_string();
            }
        }
        self
    }

    /// Referenced input files, for existence checks and hashing.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        let d = &self.data;
        let mut out: Vec<PathBuf> =
            [&d.events, &d.ceasefires, &d.covariates, &d.panels, &d.report, &self.forecast.scenario]
                .into_iter()
                .flatten()
                .cloned()
                .collect();
        if let Some(p) = self.params.as_ref().filter(|p| p.as_str() != PUBLISHED) {
            out.push(PathBuf::from(p));
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for p in self.input_paths() {
            if !p.is_file() {
                return Err(CliError::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::Config(format!("configuration key `{key}` is required for this command")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_config_dir() {
        let cfg: RunConfig = toml::from_str(
            r#"
            output_dir = "out"
            seed = 3
            params = "published"
            [data]
            panels = "in/panels.csv"
            [mcmc]
            n_burnin = 10
        "#,
        )
        .unwrap();
        let cfg = cfg.resolved(Path::new("/base"));
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert_eq!(cfg.data.panels, Some(PathBuf::from("/base/in/panels.csv")));
        assert_eq!(cfg.params.as_deref(), Some(PUBLISHED));
        assert_eq!(cfg.mcmc.n_burnin, 10);
        assert_eq!(cfg.mcmc.thin, McmcConfig::default().thin);
    }

    #[test]
    fn seed_is_mandatory_and_keys_are_checked() {
        assert!(toml::from_str::<RunConfig>("output_dir = \"o\"").is_err());
        assert!(toml::from_str::<RunConfig>("output_dir = \"o\"\nseed = 1\nbogus = 2").is_err());
    }
}
