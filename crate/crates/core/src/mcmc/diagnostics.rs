//! Convergence diagnostics: split-R̂ and effective sample size.

use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::mcmc::PosteriorDraws;

pub const MIN_SINGLE_CHAIN_DRAWS: usize = 200;
/// Coordinates with ESS below this are flagged.
pub const LOW_ESS: f64 = 100.0;
pub const HIGH_RHAT: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub names: Vec<String>,
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
    /// Names of coordinates with low ESS or high R̂.
    pub flagged: Vec<String>,
}

impl DiagnosticsReport {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn diagnostics(draws: &PosteriorDraws) -> Result<DiagnosticsReport> {
    let k = draws.unconstrained_names().len();
    let chains: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|j| draws.chains.iter().map(|c| c.draws.iter().map(|d| d[j]).collect()).collect())
        .collect();
    diagnose(draws.unconstrained_names(), &chains)
}

/// `series[coordinate][chain][iteration]`.
pub fn diagnose(names: Vec<String>, series: &[Vec<Vec<f64>>]) -> Result<DiagnosticsReport> {
    let Some(first) = series.first() else {
        return Err(Error::Invalid("no coordinates to diagnose".into()));
    };
    let n_chains = first.len();
    let len = first.iter().map(Vec::len).min().unwrap_or(0);
    if !(n_chains >= 2 && len >= 4) && !(n_chains >= 1 && len >= MIN_SINGLE_CHAIN_DRAWS) {
        return Err(Error::Invalid(format!(
            "diagnostics need at least 2 chains or {MIN_SINGLE_CHAIN_DRAWS} kept draws (got {n_chains} chains of {len})"
        )));
    }
    let mut ess = Vec::with_capacity(series.len());
    let mut rhat = Vec::with_capacity(series.len());
    let mut flagged = Vec::new();
    for (name, chains) in names.iter().zip(series) {
        let split = split_chains(chains, len);
        let r = split_rhat(&split);
        let e = effective_sample_size(&split);
        if !(e >= LOW_ESS) || !(r <= HIGH_RHAT) {
            flagged.push(name.clone());
        }
        ess.push(e);
        rhat.push(r);
    }
    Ok(DiagnosticsReport { names, ess, rhat, flagged })
}

fn split_chains(chains: &[Vec<f64>], len: usize) -> Vec<&[f64]> {
    let half = len / 2;
    chains.iter().flat_map(|c| [&c[..half], &c[len - half..len]]).collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction over already-split chains.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Multi-chain ESS with Geyer's initial monotone sequence truncation.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b_over_n = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + if m > 1 { b_over_n } else { 0.0 };
    if !(var_plus > 0.0) {
        return 1.0;
    }
    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&stats)
            .map(|(c, (mean, _))| (0..n - lag).map(|t| (c[t] - mean) * (c[t + lag] - mean)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    (total / tau.max(1.0 / total.log10().max(1.0))).min(total * total.log10().max(1.0))
}

/// Trace export: `chain,draw,<names...>` in constrained coordinates.
pub fn write_trace_csv<W: Write>(draws: &PosteriorDraws, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["chain".to_string(), "draw".into()];
    header.extend(crate::params::coordinate_names(&draws.covariates));
    w.write_record(&header).map_err(std::io::Error::other)?;
    let constrained = draws.constrained_draws();
    let mut idx = 0;
    for (c, chain) in draws.chains.iter().enumerate() {
        for i in 0..chain.draws.len() {
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(constrained[idx].iter().map(|v| v.to_string()));
            idx += 1;
            w.write_record(&row).map_err(std::io::Error::other)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, chains: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn iid_draws_have_unit_rhat_and_full_ess() {
        let r = diagnose(vec!["x".into()], &[iid(1, 4, 2000)]).unwrap();
        assert!((0.99..=1.01).contains(&r.rhat[0]), "{}", r.rhat[0]);
        assert!(r.ess[0] > 5000.0, "{}", r.ess[0]);
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn random_walk_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let walk: Vec<f64> = (0..1000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += z;
                x
            })
            .collect();
        let r = diagnose(vec!["w".into()], &[vec![walk]]).unwrap();
        assert!(r.ess[0] < 50.0, "{}", r.ess[0]);
        assert_eq!(r.flagged, vec!["w".to_string()]);
    }

    #[test]
    fn too_few_draws_rejected() {
        assert!(diagnose(vec!["x".into()], &[iid(3, 1, 150)]).is_err());
        assert!(diagnose(vec!["x".into()], &[iid(3, 2, 150)]).is_ok());
    }

    #[test]
    fn shifted_chains_have_large_rhat() {
        let mut chains = iid(4, 2, 500);
        chains[1].iter_mut().for_each(|v| *v += 5.0);
        let r = diagnose(vec!["x".into()], &[chains]).unwrap();
        assert!(r.rhat[0] > 1.5);
    }
}
