use rand::Rng;
use rayon::prelude::*;

use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::model::{Factors, PanelData};
use crate::params::{ParameterSet, NUM_STATES};
use crate::rng::{rng_from_seed, split_seed};
use crate::states::{smoothing::viterbi_path, StatePosterior};

/// Share of sweeps discarded before visits are counted.
pub const BURNIN_FRACTION: f64 = 0.1;

/// Pairwise Gibbs sampler over `(s_k, s_{k+1})`, `k = 0..n-2`, starting from
/// the Viterbi path. Returns visit proportions after burn-in.
pub fn state_space_sampler(params: &ParameterSet, panel: &CountryPanel, sweeps: usize, seed: u64) -> Result<StatePosterior> {
    let data = PanelData::new(panel)?;
    let f = Factors::compute(params, &data)?;
    let mut rng = rng_from_seed(seed);
    let probs = sample_state_proportions(&f, sweeps, &mut rng, &panel.country_id)?;
    Ok(StatePosterior { country_id: panel.country_id.clone(), weeks: panel.weeks.clone(), probs, sweeps, seed: Some(seed) })
}

/// Sampler for every panel; country `i` uses stream `i` of `seed`.
pub fn sample_all(params: &ParameterSet, panels: &[CountryPanel], sweeps: usize, seed: u64) -> Result<Vec<StatePosterior>> {
    panels
        .par_iter()
        .enumerate()
        .map(|(i, p)| state_space_sampler(params, p, sweeps, split_seed(seed, i as u64)))
        .collect()
}

/// Proportions averaged over several parameter sets (e.g. posterior draws),
/// `sweeps` per set.
pub fn averaged_state_posterior(
    param_sets: &[ParameterSet],
    panel: &CountryPanel,
    sweeps: usize,
    seed: u64,
) -> Result<StatePosterior> {
    if param_sets.is_empty() {
        return Err(Error::Invalid("no parameter sets to average over".into()));
    }
    let runs = param_sets
        .par_iter()
        .enumerate()
        .map(|(i, p)| state_space_sampler(p, panel, sweeps, split_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let m = runs.len() as f64;
    let mut probs = vec![[0.0; NUM_STATES]; panel.len()];
    for run in &runs {
        for (acc, p) in probs.iter_mut().zip(&run.probs) {
            for s in 0..NUM_STATES {
                acc[s] += p[s] / m;
            }
        }
    }
    Ok(StatePosterior { country_id: panel.country_id.clone(), weeks: panel.weeks.clone(), probs, sweeps, seed: Some(seed) })
}

pub fn sample_state_proportions<R: Rng>(
    f: &Factors,
    sweeps: usize,
    rng: &mut R,
    country: &str,
) -> Result<Vec<[f64; NUM_STATES]>> {
    if sweeps == 0 {
        return Err(Error::Invalid("sampler needs at least one sweep".into()));
    }
    let n = f.emit.len();
    let mut path = viterbi_path(f).ok_or_else(|| Error::InconsistentLabels(country.to_string()))?;
    let burnin = (sweeps as f64 * BURNIN_FRACTION).floor() as usize;
    let kept = sweeps - burnin;
    let mut counts = vec![[0u64; NUM_STATES]; n];
    let mut w = [0.0; NUM_STATES * NUM_STATES];
    for sweep in 0..sweeps {
        for k in 0..n - 1 {
            let left: [f64; NUM_STATES] = if k == 0 {
                [0, 1, 2].map(|i| f.init[i] * f.emit[0][i])
            } else {
                let prev = path[k - 1];
                [0, 1, 2].map(|i| f.trans[k][prev][i] * f.emit[k][i])
            };
            let p = &f.trans[k + 1];
            let e = &f.emit[k + 1];
            let mut total = 0.0;
            for i in 0..NUM_STATES {
                for j in 0..NUM_STATES {
                    let right = if k + 2 < n { f.trans[k + 2][j][path[k + 2]] } else { 1.0 };
                    let v = left[i] * p[i][j] * e[j] * right;
                    w[i * NUM_STATES + j] = v;
                    total += v;
                }
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Numerical(format!("state sampler: degenerate full conditional in `{country}` at week {k}")));
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = 0;
            for (idx, &v) in w.iter().enumerate() {
                if v > 0.0 {
                    pick = idx;
                    if u < v {
                        break;
                    }
                    u -= v;
                }
            }
            path[k] = pick / NUM_STATES;
            path[k + 1] = pick % NUM_STATES;
        }
        if sweep >= burnin {
            for (c, &s) in counts.iter_mut().zip(&path) {
                c[s] += 1;
            }
        }
    }
    Ok(counts.into_iter().map(|c| c.map(|v| v as f64 / kept as f64)).collect())
}
