//! Adaptive Metropolis-within-Gibbs over the unconstrained coordinates.
//!
//! Each iteration updates every block in turn with a symmetric Gaussian
//! random-walk proposal. During burn-in the per-block step is multiplied by
//! `adapt_factor` when a window's acceptance rate is above the target
//! interval and divided by it when below; with the covariance proposal the
//! block's shape is also re-estimated from burn-in history. Everything is
//! frozen once burn-in ends.

pub mod diagnostics;
pub mod draws;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::params::{Layout, ParameterSet};
use crate::posterior::{CachedPosterior, PosteriorTarget, PriorSpec, Touches};
use crate::rng::{rng_from_seed, split_seed};

pub use diagnostics::{diagnose, diagnostics, write_trace_csv, DiagnosticsReport};
pub use draws::{quantile_sorted, ChainDraws, PosteriorDraws, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// `step * z` with `z` standard normal.
    #[default]
    Spherical,
    /// `step * L z` with `L L'` the burn-in covariance estimate of the block.
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    /// Iterations after burn-in.
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Coordinate blocks; `None` uses zeta / beta / (a, c, pi).
    pub groups: Option<Vec<Vec<usize>>>,
    pub target_accept: (f64, f64),
    pub adapt_interval: usize,
    pub adapt_factor: f64,
    /// Starting step per block.
    pub initial_step: Vec<f64>,
    pub proposal: ProposalKind,
    pub chains: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iterations: 20_000,
            n_burnin: 10_000,
            thin: 10,
            seed: 1,
            groups: None,
            target_accept: (0.3, 0.5),
            adapt_interval: 50,
            adapt_factor: 1.1,
            initial_step: vec![0.05, 0.05, 0.05],
            proposal: ProposalKind::Spherical,
            chains: 1,
        }
    }
}

/// Default partition: zeta, beta, then (a, c, pi).
pub fn default_groups(layout: &Layout) -> Vec<Vec<usize>> {
    vec![layout.zeta_range().collect(), layout.beta_range().collect(), layout.scale_range().collect()]
}

impl McmcConfig {
    pub fn resolved_groups(&self, layout: &Layout) -> Result<Vec<Vec<usize>>> {
        let groups = self.groups.clone().unwrap_or_else(|| default_groups(layout));
        let mut seen = vec![false; layout.len()];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Invalid("empty parameter group".into()));
            }
            for &i in g {
                if i >= layout.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Invalid(format!("parameter index {i} is out of range or repeated in groups")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Invalid(format!("parameter index {missing} belongs to no group")));
        }
        Ok(groups)
    }

    pub fn validate(&self, layout: &Layout) -> Result<Vec<Vec<usize>>> {
        let groups = self.resolved_groups(layout)?;
        let (lo, hi) = self.target_accept;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Invalid("target_accept must satisfy 0 < lo < hi < 1".into()));
        }
        if self.thin == 0 || self.adapt_interval == 0 || self.chains == 0 {
            return Err(Error::Invalid("thin, adapt_interval and chains must be positive".into()));
        }
        if self.n_iterations < self.thin {
            return Err(Error::Invalid("n_iterations must be at least thin".into()));
        }
        if !(self.adapt_factor > 1.0) {
            return Err(Error::Invalid("adapt_factor must exceed 1".into()));
        }
        if self.initial_step.len() != groups.len() || self.initial_step.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Invalid(format!("initial_step needs {} positive entries", groups.len())));
        }
        Ok(groups)
    }
}

/// Attempts allowed before [`initialize`] gives up.
pub const INIT_ATTEMPTS: u64 = 100;

/// Deterministic starting point with a finite posterior.
pub fn initialize(target: &PosteriorTarget, seed: u64) -> Result<ParameterSet> {
    for attempt in 0..INIT_ATTEMPTS {
        let mut rng = rng_from_seed(split_seed(seed, attempt));
        let p = draw_start(&mut rng, target.covariates());
        if target.log_posterior(&p.to_unconstrained().0).is_finite() {
            return Ok(p);
        }
    }
    Err(Error::Numerical(format!("no finite starting point after {INIT_ATTEMPTS} attempts")))
}

fn draw_start<R: Rng>(rng: &mut R, covariates: &[String]) -> ParameterSet {
    let d = covariates.len();
    let mut z = || -> f64 { StandardNormal.sample(rng) };
    let mut zeta = vec![0.0; 6 * d];
    for r in 0..6 {
        zeta[r * d] = -2.0 + 0.5 * z();
    }
    let mut beta = vec![0.0; 2 * d];
    let (b2, b3) = (-2.0 + 0.5 * z(), -2.0 + 0.5 * z());
    beta[0] = b2.min(b3);
    beta[d] = b2.max(b3);
    let mut a = [0.001, 0.1, 5.0].map(|v: f64| v * (0.1 * z()).exp());
    a.sort_by(f64::total_cmp);
    let c = 0.05 * (0.1 * z()).exp();
    let w = [0.96, 0.03, 0.01].map(|v: f64| v * (0.1 * z()).exp());
    let s: f64 = w.iter().sum();
    let pi = [w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s];
    ParameterSet::new(covariates.to_vec(), zeta, beta, a, c, pi).expect("start satisfies constraints")
}

/// Run the sampler on the panels' posterior.
pub fn fit(panels: &[CountryPanel], prior: &PriorSpec, config: &McmcConfig) -> Result<PosteriorDraws> {
    let first = panels.first().ok_or_else(|| Error::Invalid("at least one panel is required".into()))?;
    let target = PosteriorTarget::new(first.covariates.clone(), panels, prior.clone())?;
    fit_target(&target, config, None)
}

/// Run the sampler on an arbitrary target, optionally from a given start.
pub fn fit_target(target: &PosteriorTarget, config: &McmcConfig, start: Option<&ParameterSet>) -> Result<PosteriorDraws> {
    let layout = target.layout();
    let groups = config.validate(&layout)?;
    let chains: Vec<Result<ChainDraws>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let seed = split_seed(config.seed, c as u64);
            let init = match start {
                Some(p) => p.clone(),
                None => initialize(target, seed)?,
            };
            run_chain(target, config, &groups, &init.to_unconstrained().0, seed)
        })
        .collect();
    let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws::new(target.covariates().to_vec(), config.clone(), groups, chains))
}

struct BlockState {
    indices: Vec<usize>,
    touches: Touches,
    step: f64,
    chol: Option<DMatrix<f64>>,
    window_accepts: usize,
    total_accepts: usize,
    post_accepts: usize,
}

/// Minimum burn-in history before a covariance estimate replaces the identity.
const COV_MIN_HISTORY: usize = 500;
/// Share of burn-in during which the proposal shape may change; the rest
/// lets the step size settle on the final shape.
const COV_RESHAPE_SHARE: f64 = 0.8;

fn run_chain(
    target: &PosteriorTarget,
    config: &McmcConfig,
    groups: &[Vec<usize>],
    start: &[f64],
    seed: u64,
) -> Result<ChainDraws> {
    let layout = target.layout();
    let mut rng = rng_from_seed(seed);
    let mut cache = CachedPosterior::new(target, start);
    if !cache.log_posterior().is_finite() {
        return Err(Error::Numerical("initial log posterior is not finite; choose a new initialization".into()));
    }
    let mut blocks: Vec<BlockState> = groups
        .iter()
        .zip(&config.initial_step)
        .map(|(g, &step)| BlockState {
            indices: g.clone(),
            touches: Touches::of(&layout, g),
            step,
            chol: None,
            window_accepts: 0,
            total_accepts: 0,
            post_accepts: 0,
        })
        .collect();

    let mut theta = start.to_vec();
    let mut proposal = theta.clone();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut draws = Vec::with_capacity(config.n_iterations / config.thin);
    let mut window_acceptance: Vec<Vec<f64>> = Vec::new();
    let mut step_trajectory: Vec<Vec<f64>> = vec![blocks.iter().map(|b| b.step).collect()];
    let mut log_post_trace = Vec::with_capacity(config.n_iterations / config.thin);
    let total = config.n_burnin + config.n_iterations;
    let (lo, hi) = config.target_accept;
    let mut noise: Vec<f64> = Vec::new();

    for it in 0..total {
        let burning = it < config.n_burnin;
        for b in blocks.iter_mut() {
            noise.clear();
            noise.extend((0..b.indices.len()).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
            let delta: Vec<f64> = match &b.chol {
                Some(l) => (l * DVector::from_column_slice(&noise)).iter().copied().collect(),
                None => noise.clone(),
            };
            proposal.copy_from_slice(&theta);
            for (&i, dz) in b.indices.iter().zip(&delta) {
                proposal[i] += b.step * dz;
            }
            let current = cache.log_posterior();
            let lp = cache.propose(target, &proposal, b.touches);
            let u: f64 = rng.random();
            if lp.is_finite() && u.ln() < lp - current {
                cache.accept(&proposal);
                theta.copy_from_slice(&proposal);
                b.window_accepts += 1;
                b.total_accepts += 1;
                if !burning {
                    b.post_accepts += 1;
                }
            }
        }

        if burning && config.proposal == ProposalKind::Covariance {
            history.push(theta.clone());
        }
        if (it + 1) % config.adapt_interval == 0 {
            let rates: Vec<f64> = blocks.iter().map(|b| b.window_accepts as f64 / config.adapt_interval as f64).collect();
            window_acceptance.push(rates.clone());
            for (b, rate) in blocks.iter_mut().zip(&rates) {
                b.window_accepts = 0;
                if burning {
                    if *rate < lo {
                        b.step /= config.adapt_factor;
                    } else if *rate > hi {
                        b.step *= config.adapt_factor;
                    }
                }
            }
            let reshaping = (it + 1) as f64 <= COV_RESHAPE_SHARE * config.n_burnin as f64;
            if reshaping && config.proposal == ProposalKind::Covariance && history.len() >= COV_MIN_HISTORY {
                // refresh the shape every 10 windows from the latter half of history
                if ((it + 1) / config.adapt_interval) % 10 == 0 {
                    for b in blocks.iter_mut() {
                        let first = b.chol.is_none();
                        if let Some(l) = block_cholesky(&history[history.len() / 2..], &b.indices) {
                            b.chol = Some(l);
                            if first {
                                b.step = 2.38 / (b.indices.len() as f64).sqrt();
                            }
                        }
                    }
                }
            }
            if burning {
                step_trajectory.push(blocks.iter().map(|b| b.step).collect());
            }
        }
        if !burning && (it + 1 - config.n_burnin) % config.thin == 0 {
            draws.push(theta.clone());
            log_post_trace.push(cache.log_posterior());
        }
    }

    let post = config.n_iterations as f64;
    Ok(ChainDraws {
        seed,
        initial: start.to_vec(),
        draws,
        log_posterior: log_post_trace,
        window_acceptance,
        step_trajectory,
        post_burnin_acceptance: blocks.iter().map(|b| b.post_accepts as f64 / post).collect(),
        overall_acceptance: blocks.iter().map(|b| b.total_accepts as f64 / total as f64).collect(),
        final_steps: blocks.iter().map(|b| b.step).collect(),
    })
}

/// Cholesky factor of the sample covariance of `indices` over `rows`,
/// regularized on the diagonal.
fn block_cholesky(rows: &[Vec<f64>], indices: &[usize]) -> Option<DMatrix<f64>> {
    let m = indices.len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; m];
    for r in rows {
        for (j, &i) in indices.iter().enumerate() {
            mean[j] += r[i] / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for r in rows {
        for a in 0..m {
            let da = r[indices[a]] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (r[indices[b]] - mean[b]) / (n - 1.0);
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
        cov[(a, a)] += 1e-6;
    }
    nalgebra::Cholesky::new(cov).map(|c| c.l())
}
