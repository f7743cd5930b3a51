use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::model::{Factors, PanelData};
use crate::params::{ParameterSet, NUM_STATES};
use crate::states::StatePosterior;

/// Exact smoothing marginals `P(s_k | y)` on the masked factors.
pub fn forward_backward(params: &ParameterSet, panel: &CountryPanel) -> Result<StatePosterior> {
    let data = PanelData::new(panel)?;
    let f = Factors::compute(params, &data)?;
    let probs = smooth(&f).ok_or_else(|| Error::InconsistentLabels(panel.country_id.clone()))?;
    Ok(StatePosterior { country_id: panel.country_id.clone(), weeks: panel.weeks.clone(), probs, sweeps: 0, seed: None })
}

/// Two-pass scaled recursion; `None` when no path has positive probability.
pub fn smooth(f: &Factors) -> Option<Vec<[f64; NUM_STATES]>> {
    let n = f.emit.len();
    let mut alpha = vec![[0.0; NUM_STATES]; n];
    let mut norm = vec![0.0; n];
    for s in 0..NUM_STATES {
        alpha[0][s] = f.init[s] * f.emit[0][s];
    }
    for k in 0..n {
        if k > 0 {
            let p = &f.trans[k];
            for j in 0..NUM_STATES {
                alpha[k][j] = (0..NUM_STATES).map(|i| alpha[k - 1][i] * p[i][j]).sum::<f64>() * f.emit[k][j];
            }
        }
        let total: f64 = alpha[k].iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        norm[k] = total;
        alpha[k].iter_mut().for_each(|v| *v /= total);
    }
    let mut beta = [1.0; NUM_STATES];
    let mut out = vec![[0.0; NUM_STATES]; n];
    for k in (0..n).rev() {
        if k + 1 < n {
            let p = &f.trans[k + 1];
            let e = &f.emit[k + 1];
            let mut next = [0.0; NUM_STATES];
            for (i, b) in next.iter_mut().enumerate() {
                *b = (0..NUM_STATES).map(|j| p[i][j] * e[j] * beta[j]).sum::<f64>() / norm[k + 1];
            }
            beta = next;
        }
        let mut g = [0.0; NUM_STATES];
        for s in 0..NUM_STATES {
            g[s] = alpha[k][s] * beta[s];
        }
        let total: f64 = g.iter().sum();
        out[k] = g.map(|v| v / total);
    }
    Some(out)
}

/// Most probable joint state path (0-based states) on the masked factors.
pub fn viterbi(params: &ParameterSet, panel: &CountryPanel) -> Result<Vec<usize>> {
    let data = PanelData::new(panel)?;
    let f = Factors::compute(params, &data)?;
    viterbi_path(&f).ok_or_else(|| Error::InconsistentLabels(panel.country_id.clone()))
}

pub fn viterbi_path(f: &Factors) -> Option<Vec<usize>> {
    let n = f.emit.len();
    let mut delta = [0.0; NUM_STATES];
    for s in 0..NUM_STATES {
        delta[s] = (f.init[s] * f.emit[0][s]).ln();
    }
    let mut back = vec![[0usize; NUM_STATES]; n];
    for k in 1..n {
        let p = &f.trans[k];
        let mut next = [f64::NEG_INFINITY; NUM_STATES];
        for j in 0..NUM_STATES {
            let le = f.emit[k][j].ln();
            for i in 0..NUM_STATES {
                let v = delta[i] + p[i][j].ln() + le;
                if v > next[j] {
                    next[j] = v;
                    back[k][j] = i;
                }
            }
        }
        delta = next;
    }
    let (mut s, best) = delta.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
        if v > acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    if !best.is_finite() {
        return None;
    }
    let mut path = vec![0; n];
    for k in (0..n).rev() {
        path[k] = s;
        s = back[k][s];
    }
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{emission_rate, nb_log_pmf, transition_matrix, LEAD_WEEKS};
    use crate::testutil::{random_panel, random_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Path-enumeration marginals and best path (log-probabilities built
    /// from the public transition and emission functions).
    fn enumerate(params: &ParameterSet, panel: &CountryPanel) -> (Vec<[f64; 3]>, Vec<usize>) {
        let n = panel.len();
        let pi = params.pi();
        let mut marg = vec![[0.0; 3]; n];
        let mut weights = Vec::new();
        let mut paths = Vec::new();
        for code in 0..3usize.pow(n as u32) {
            let path: Vec<usize> = (0..n).map(|k| code / 3usize.pow(k as u32) % 3).collect();
            if (0..n).any(|k| panel.labels[k] && path[k] != 0) {
                continue;
            }
            let mut lp = pi[path[0]].ln();
            for k in 1..n {
                lp += transition_matrix(params, panel.x_row(k)).unwrap().probs[path[k - 1]][path[k]].ln();
            }
            for k in LEAD_WEEKS..n {
                let lags = [panel.deaths[k - 4], panel.deaths[k - 3], panel.deaths[k - 2], panel.deaths[k - 1]];
                let ctx = emission_rate(params, path[k], lags, panel.x_row(k)).unwrap();
                lp += nb_log_pmf(panel.deaths[k], ctx.r, ctx.p);
            }
            weights.push(lp);
            paths.push(path);
        }
        let m = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = weights.iter().map(|w| (w - m).exp()).sum();
        for (w, path) in weights.iter().zip(&paths) {
            for k in 0..n {
                marg[k][path[k]] += (w - m).exp() / z;
            }
        }
        let best = weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        (marg, paths[best].clone())
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let params = random_params(&mut rng, 4);
            let panel = random_panel(&mut rng, &params, 8, 0.2);
            let (marg, best) = enumerate(&params, &panel);
            let post = forward_backward(&params, &panel).unwrap();
            for (a, b) in post.probs.iter().zip(&marg) {
                for s in 0..3 {
                    assert!((a[s] - b[s]).abs() < 1e-10, "{a:?} vs {b:?}");
                }
            }
            assert_eq!(viterbi(&params, &panel).unwrap(), best);
        }
    }

    #[test]
    fn pure_chain_marginals() {
        let p = [[0.9, 0.07, 0.03], [0.2, 0.7, 0.1], [0.1, 0.3, 0.6]];
        let n = 12;
        let mut f = Factors::new(n);
        f.init = [0.5, 0.3, 0.2];
        f.trans.iter_mut().for_each(|t| *t = p);
        f.emit.iter_mut().for_each(|e| *e = [1.0; 3]);
        let probs = smooth(&f).unwrap();
        let mut law = f.init;
        for k in 0..n {
            for s in 0..3 {
                assert!((probs[k][s] - law[s]).abs() < 1e-12);
            }
            law = [0, 1, 2].map(|j| (0..3).map(|i| law[i] * p[i][j]).sum());
        }
    }

    #[test]
    fn rows_sum_to_one_and_labels_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let params = random_params(&mut rng, 8);
        let panel = random_panel(&mut rng, &params, 300, 0.3);
        let post = forward_backward(&params, &panel).unwrap();
        for (p, &l) in post.probs.iter().zip(&panel.labels) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if l {
                assert_eq!(p[0], 1.0);
            }
        }
    }

    #[test]
    fn impossible_labels_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let params = random_params(&mut rng, 4).with_pi([0.0, 0.5, 0.5]);
        // π1 = 0 is outside the support; force it through the factors instead.
        assert!(params.is_err());
        let params = random_params(&mut rng, 4);
        let panel = random_panel(&mut rng, &params, 10, 0.0);
        let mut f = Factors::compute(&params, &PanelData::new(&panel).unwrap()).unwrap();
        f.init = [0.0, 1.0, 0.0];
        f.emit[0] = [1.0, 0.0, 0.0];
        assert!(smooth(&f).is_none());
        assert!(viterbi_path(&f).is_none());
    }
}
