use serde::Serialize;
use std::io::Write;

use crate::error::Result;
use crate::mcmc::McmcConfig;
use crate::params::{coordinate_names, ParameterSet, Theta};

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub seed: u64,
    pub initial: Vec<f64>,
    /// Kept draws in unconstrained coordinates.
    pub draws: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    /// Acceptance rate per block for every adaptation window.
    pub window_acceptance: Vec<Vec<f64>>,
    /// Step sizes per block: the start, then after each burn-in window.
    pub step_trajectory: Vec<Vec<f64>>,
    pub post_burnin_acceptance: Vec<f64>,
    pub overall_acceptance: Vec<f64>,
    pub final_steps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub covariates: Vec<String>,
    pub config: McmcConfig,
    pub groups: Vec<Vec<usize>>,
    pub chains: Vec<ChainDraws>,
}

/// Per-coordinate marginal summaries in constrained coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PosteriorDraws {
    pub fn new(covariates: Vec<String>, config: McmcConfig, groups: Vec<Vec<usize>>, chains: Vec<ChainDraws>) -> Self {
        PosteriorDraws { covariates, config, groups, chains }
    }

    pub fn num_kept(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn all_draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    /// Column names of the unconstrained coordinates.
    pub fn unconstrained_names(&self) -> Vec<String> {
        let mut names = coordinate_names(&self.covariates);
        let n = names.len();
        for (slot, name) in names[n - 6..].iter_mut().zip(["log_a1", "log_a2", "log_a3", "log_c", "logit_pi2", "logit_pi3"]) {
            *slot = name.to_string();
        }
        names
    }

    /// Draws mapped back to constrained coordinates (a, c and π in place of
    /// their transforms).
    pub fn constrained_draws(&self) -> Vec<Vec<f64>> {
        self.all_draws()
            .map(|t| {
                ParameterSet::from_unconstrained(&self.covariates, &Theta(t.clone()))
                    .expect("kept draws satisfy the constraints")
                    .constrained_values()
            })
            .collect()
    }

    pub fn summary(&self) -> Summary {
        let draws = self.constrained_draws();
        let names = coordinate_names(&self.covariates);
        let k = names.len();
        let n = draws.len() as f64;
        let mut s = Summary {
            names,
            mean: vec![0.0; k],
            sd: vec![0.0; k],
            median: vec![0.0; k],
            q025: vec![0.0; k],
            q975: vec![0.0; k],
        };
        let mut col = Vec::with_capacity(draws.len());
        for j in 0..k {
            col.clear();
            col.extend(draws.iter().map(|d| d[j]));
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            col.sort_by(f64::total_cmp);
            s.mean[j] = mean;
            s.sd[j] = var.sqrt();
            s.median[j] = quantile_sorted(&col, 0.5);
            s.q025[j] = quantile_sorted(&col, 0.025);
            s.q975[j] = quantile_sorted(&col, 0.975);
        }
        s
    }

    /// Posterior-mean parameter set (means taken in constrained coordinates,
    /// which preserves the ordering constraints and the simplex).
    pub fn posterior_mean(&self) -> Result<ParameterSet> {
        let s = self.summary();
        let d = self.covariates.len();
        let m = &s.mean;
        let (zeta, rest) = m.split_at(6 * d);
        let (beta, rest) = rest.split_at(2 * d);
        let pi2 = rest[4];
        let pi3 = rest[5];
        ParameterSet::new(
            self.covariates.clone(),
            zeta.to_vec(),
            beta.to_vec(),
            [rest[0], rest[1], rest[2]],
            rest[3],
            [1.0 - pi2 - pi3, pi2, pi3],
        )
    }

    /// One row per kept iteration: `chain,iteration,log_posterior,<coordinates>`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["chain".to_string(), "iteration".into(), "log_posterior".into()];
        header.extend(self.unconstrained_names());
        w.write_record(&header).map_err(|e| std::io::Error::other(e))?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, (d, lp)) in chain.draws.iter().zip(&chain.log_posterior).enumerate() {
                let iteration = self.config.n_burnin + (i + 1) * self.config.thin;
                let mut row = vec![c.to_string(), iteration.to_string(), lp.to_string()];
                row.extend(d.iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(|e| std::io::Error::other(e))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let s = self.summary();
        let chains: Vec<_> = self
            .chains
            .iter()
            .map(|c| {
                serde_json::json!({
                    "seed": c.seed,
                    "kept_draws": c.draws.len(),
                    "post_burnin_acceptance": c.post_burnin_acceptance,
                    "overall_acceptance": c.overall_acceptance,
                    "final_steps": c.final_steps,
                    "step_trajectory": c.step_trajectory,
                    "window_acceptance": c.window_acceptance,
                })
            })
            .collect();
        serde_json::json!({
            "covariates": self.covariates,
            "config": self.config,
            "groups": self.groups,
            "parameters": s,
            "chains": chains,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(quantile_sorted(&v, 0.5), 5.0);
        assert!((quantile_sorted(&v, 0.025) - 0.25).abs() < 1e-12);
        assert_eq!(quantile_sorted(&v, 1.0), 10.0);
    }
}
