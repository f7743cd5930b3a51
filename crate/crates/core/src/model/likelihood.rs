//! Marginal likelihood of one country's counts with the latent path summed out.
//!
//! The first [`LEAD_WEEKS`] weeks only contribute chain factors; emission
//! terms start at week 5 where four lagged counts exist. A week fixed to
//! state 1 multiplies the forward vector by the indicator of state 1 (for the
//! lead weeks this is the same as zeroing the other columns of that week's
//! transition matrix; afterwards it zeroes the other diagonal entries of D).

use rayon::prelude::*;

use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::model::emission::{emission_rate_from_mean, nb_log_pmf};
use crate::model::transition::{log_rates, probs_from_rates, transition_matrix, Matrix3};
use crate::params::{ParameterSet, NUM_STATES};

/// Weeks with no emission term.
pub const LEAD_WEEKS: usize = 4;
pub const MIN_WEEKS: usize = LEAD_WEEKS + 1;
/// Longest panel the exhaustive oracle accepts.
pub const MAX_ENUMERATION_WEEKS: usize = 12;

/// Parameter-independent per-panel quantities.
#[derive(Debug, Clone)]
pub struct PanelData {
    pub n: usize,
    pub d: usize,
    pub y: Vec<u64>,
    pub lag_mean: Vec<f64>,
    lgamma_y1: Vec<f64>,
    pub x: Vec<f64>,
    /// Which states each week may take.
    pub allowed: Vec<[bool; NUM_STATES]>,
}

impl PanelData {
    pub fn new(panel: &CountryPanel) -> Result<Self> {
        panel.validate()?;
        let n = panel.len();
        if n < MIN_WEEKS {
            return Err(Error::PanelTooShort { country: panel.country_id.clone(), weeks: n, min: MIN_WEEKS });
        }
        let lag_mean = (0..n).map(|k| if k >= LEAD_WEEKS { panel.lag_mean(k) } else { 0.0 }).collect();
        let lgamma_y1 = panel.deaths.iter().map(|&y| libm::lgamma(y as f64 + 1.0)).collect();
        let allowed = panel.labels.iter().map(|&l| if l { [true, false, false] } else { [true; 3] }).collect();
        Ok(PanelData {
            n,
            d: panel.dim(),
            y: panel.deaths.clone(),
            lag_mean,
            lgamma_y1,
            x: panel.x.clone(),
            allowed,
        })
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }
}

/// Per-week chain and emission factors at fixed parameters.
#[derive(Debug, Clone)]
pub struct Factors {
    pub init: [f64; NUM_STATES],
    /// `trans[k]` moves week `k-1` to week `k`; `trans[0]` is unused.
    pub trans: Vec<Matrix3>,
    /// Emission terms divided by `exp(scale[k])`, masked states set to 0.
    /// Lead weeks hold the bare mask.
    pub emit: Vec<[f64; NUM_STATES]>,
    pub scale: Vec<f64>,
}

impl Factors {
    pub fn new(n: usize) -> Self {
        Factors {
            init: [0.0; NUM_STATES],
            trans: vec![[[0.0; NUM_STATES]; NUM_STATES]; n],
            emit: vec![[0.0; NUM_STATES]; n],
            scale: vec![0.0; n],
        }
    }

    /// Checked construction used outside the sampler hot path.
    pub fn compute(params: &ParameterSet, data: &PanelData) -> Result<Self> {
        if params.dim() != data.d {
            return Err(Error::Invalid(format!("parameters use {} covariates, panel has {}", params.dim(), data.d)));
        }
        for k in 1..data.n {
            transition_matrix(params, data.x_row(k))?;
        }
        for k in LEAD_WEEKS..data.n {
            for s in 0..NUM_STATES {
                emission_rate_from_mean(params, s, data.lag_mean[k], data.x_row(k))?;
            }
        }
        let mut f = Factors::new(data.n);
        f.fill_initial(params);
        f.fill_transitions(params.zeta(), data);
        f.fill_emissions(params, data);
        Ok(f)
    }

    pub fn fill_initial(&mut self, params: &ParameterSet) {
        self.init = params.pi();
    }

    pub fn fill_transitions(&mut self, zeta: &[f64], data: &PanelData) {
        for k in 1..data.n {
            self.trans[k] = probs_from_rates(&log_rates(zeta, data.x_row(k)));
        }
    }

    pub fn fill_emissions(&mut self, params: &ParameterSet, data: &PanelData) {
        let a = params.a();
        let p = params.p();
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        let d = data.d;
        let beta = params.beta();
        for k in 0..data.n {
            let allowed = data.allowed[k];
            if k < LEAD_WEEKS {
                self.emit[k] = allowed.map(|b| if b { 1.0 } else { 0.0 });
                self.scale[k] = 0.0;
                continue;
            }
            let y = data.y[k];
            let lm = data.lag_mean[k];
            let x = data.x_row(k);
            let mut logs = [f64::NEG_INFINITY; NUM_STATES];
            for s in 0..NUM_STATES {
                if !allowed[s] {
                    continue;
                }
                let r = if s == 0 {
                    a[0]
                } else {
                    let eta: f64 = beta[(s - 1) * d..s * d].iter().zip(x).map(|(b, v)| b * v).sum();
                    a[s] + eta.exp() * lm
                };
                logs[s] = if y == 0 {
                    r * ln_p
                } else {
                    let yf = y as f64;
                    libm::lgamma(r + yf) - libm::lgamma(r) - data.lgamma_y1[k] + r * ln_p + yf * ln_q
                };
            }
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            self.scale[k] = m;
            self.emit[k] = if m.is_finite() { logs.map(|l| (l - m).exp()) } else { [0.0; NUM_STATES] };
        }
    }

    /// Scaled forward pass; returns the log marginal likelihood (−∞ when the
    /// masks and factors leave no admissible path).
    pub fn log_likelihood(&self) -> f64 {
        forward(&self.init, &self.trans, &self.emit, &self.scale)
    }
}

/// Forward recursion over separately stored factors, renormalizing each week.
pub fn forward(init: &[f64; NUM_STATES], trans: &[Matrix3], emit: &[[f64; NUM_STATES]], scale: &[f64]) -> f64 {
    let n = emit.len();
    let mut alpha = [0.0; NUM_STATES];
    for s in 0..NUM_STATES {
        alpha[s] = init[s] * emit[0][s];
    }
    let total: f64 = alpha.iter().sum();
    if !(total > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut ll = total.ln();
    alpha.iter_mut().for_each(|v| *v /= total);
    for k in 1..n {
        let p = &trans[k];
        let e = &emit[k];
        let mut next = [0.0; NUM_STATES];
        for (j, nj) in next.iter_mut().enumerate() {
            *nj = (alpha[0] * p[0][j] + alpha[1] * p[1][j] + alpha[2] * p[2][j]) * e[j];
        }
        let total: f64 = next.iter().sum();
        if !(total > 0.0) || !scale[k].is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += total.ln() + scale[k];
        for (a, v) in alpha.iter_mut().zip(next) {
            *a = v / total;
        }
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Log marginal likelihood of one panel.
pub fn marginal_log_likelihood(params: &ParameterSet, panel: &CountryPanel) -> Result<f64> {
    let data = PanelData::new(panel)?;
    Ok(Factors::compute(params, &data)?.log_likelihood())
}

/// Sum over countries; evaluated in parallel, reduced in panel order.
pub fn total_log_likelihood(params: &ParameterSet, panels: &[CountryPanel]) -> Result<f64> {
    let terms: Vec<Result<f64>> = panels.par_iter().map(|p| marginal_log_likelihood(params, p)).collect();
    let mut sum = 0.0;
    for t in terms {
        sum += t?;
    }
    Ok(sum)
}

/// Exhaustive sum over all label-consistent state paths. Reference oracle
/// for short panels only.
pub fn brute_force_log_likelihood(params: &ParameterSet, panel: &CountryPanel) -> Result<f64> {
    let n = panel.len();
    if n > MAX_ENUMERATION_WEEKS {
        return Err(Error::EnumerationTooLarge { weeks: n, max: MAX_ENUMERATION_WEEKS });
    }
    panel.validate()?;
    if n < MIN_WEEKS {
        return Err(Error::PanelTooShort { country: panel.country_id.clone(), weeks: n, min: MIN_WEEKS });
    }
    let mut log_p = vec![[[0.0; NUM_STATES]; NUM_STATES]; n];
    for (k, lp) in log_p.iter_mut().enumerate().skip(1) {
        let m = transition_matrix(params, panel.x_row(k))?;
        for i in 0..NUM_STATES {
            for j in 0..NUM_STATES {
                lp[i][j] = m.probs[i][j].ln();
            }
        }
    }
    let mut log_e = vec![[0.0; NUM_STATES]; n];
    for (k, le) in log_e.iter_mut().enumerate().skip(LEAD_WEEKS) {
        let lags = [panel.deaths[k - 4], panel.deaths[k - 3], panel.deaths[k - 2], panel.deaths[k - 1]];
        for (s, v) in le.iter_mut().enumerate() {
            let ctx = crate::model::emission::emission_rate(params, s, lags, panel.x_row(k))?;
            *v = nb_log_pmf(panel.deaths[k], ctx.r, ctx.p);
        }
    }
    let pi = params.pi();
    let mut terms = Vec::new();
    let mut path = vec![0usize; n];
    let total = NUM_STATES.pow(n as u32);
    'paths: for code in 0..total {
        let mut c = code;
        for s in path.iter_mut() {
            *s = c % NUM_STATES;
            c /= NUM_STATES;
        }
        for k in 0..n {
            if panel.labels[k] && path[k] != 0 {
                continue 'paths;
            }
        }
        let mut lp = pi[path[0]].ln() + log_e[0][path[0]];
        for k in 1..n {
            lp += log_p[k][path[k - 1]][path[k]] + log_e[k][path[k]];
        }
        terms.push(lp);
    }
    Ok(log_sum_exp(&terms))
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
