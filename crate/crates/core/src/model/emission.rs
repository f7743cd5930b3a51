//! Negative-binomial emissions with a state-switched autoregressive size.

use libm::lgamma;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::params::ParameterSet;

/// Emission law for one week and state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionContext {
    /// 0-based state index (0 = non-violent).
    pub state: usize,
    /// NB size.
    pub r: f64,
    /// NB success probability `c / (1 + c)`.
    pub p: f64,
    pub c: f64,
    /// Autoregressive slope; 0 in the non-violent state.
    pub rho: f64,
    /// Mean of the previous four counts.
    pub lag_mean: f64,
}

impl EmissionContext {
    /// Conditional mean `r / c`.
    pub fn mean(&self) -> f64 {
        self.r / self.c
    }

    /// Autoregressive coefficient of the conditional mean, `rho / c`.
    pub fn ar_coefficient(&self) -> f64 {
        self.rho / self.c
    }

    /// `rho / c >= 1`: the mean recursion has no finite fixed point.
    pub fn is_explosive(&self) -> bool {
        self.ar_coefficient() >= 1.0
    }

    pub fn log_pmf(&self, y: u64) -> f64 {
        nb_log_pmf(y, self.r, self.p)
    }
}

/// `rho` for `state` at covariates `x`: 0 for state 0, else `exp(beta_row · x)`.
pub(crate) fn rho(params: &ParameterSet, state: usize, x: &[f64]) -> f64 {
    if state == 0 {
        0.0
    } else {
        params.beta_row(state).iter().zip(x).map(|(b, v)| b * v).sum::<f64>().exp()
    }
}

/// Emission context given the four previous counts.
pub fn emission_rate(params: &ParameterSet, state: usize, lag4: [u64; 4], x: &[f64]) -> Result<EmissionContext> {
    let lag_mean = lag4.iter().sum::<u64>() as f64 / 4.0;
    emission_rate_from_mean(params, state, lag_mean, x)
}

pub fn emission_rate_from_mean(params: &ParameterSet, state: usize, lag_mean: f64, x: &[f64]) -> Result<EmissionContext> {
    if state > 2 {
        return Err(Error::Invalid(format!("state index {state} out of range")));
    }
    if x.len() != params.dim() {
        return Err(Error::Invalid(format!("covariate vector has length {}, expected {}", x.len(), params.dim())));
    }
    let rho = rho(params, state, x);
    let r = params.a()[state] + rho * lag_mean;
    if !rho.is_finite() || !r.is_finite() {
        return Err(Error::EmissionOverflow { state });
    }
    Ok(EmissionContext { state, r, p: params.p(), c: params.c(), rho, lag_mean })
}

/// Log NB pmf `C(r+y-1, y) p^r (1-p)^y`, extended to real `r > 0` via log-gamma.
pub fn nb_log_pmf(y: u64, r: f64, p: f64) -> f64 {
    if y == 0 {
        return r * p.ln();
    }
    let yf = y as f64;
    lgamma(r + yf) - lgamma(r) - lgamma(yf + 1.0) + r * p.ln() + yf * (-p).ln_1p()
}

/// Largest Poisson mean the sampler accepts; larger gamma draws are clamped.
const MAX_POISSON_MEAN: f64 = 1e15;

/// Draw from NB(r, p) as a gamma-Poisson mixture: `λ ~ Gamma(r, (1-p)/p)`,
/// `y ~ Poisson(λ)`. Returns 0 when `r` or the drawn rate is 0.
pub fn sample_nb<R: Rng + ?Sized>(rng: &mut R, r: f64, p: f64) -> u64 {
    if !(r > 0.0) {
        return 0;
    }
    let lambda = match Gamma::new(r, (1.0 - p) / p) {
        Ok(g) => g.sample(rng),
        Err(_) => return 0,
    };
    if !(lambda > 0.0) {
        return 0;
    }
    match Poisson::new(lambda.min(MAX_POISSON_MEAN)) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_only() -> Vec<f64> {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        x
    }

    #[test]
    fn pmf_special_cases() {
        assert_eq!(nb_log_pmf(0, 2.5, 0.3), 2.5 * 0.3f64.ln());
        assert!((nb_log_pmf(3, 1.0, 0.5) - 0.0625f64.ln()).abs() < 1e-14);
        // binomial coefficient form for integer r
        let (r, p, y) = (4.0, 0.2f64, 6u64);
        let direct = (9.0 * 8.0 * 7.0 * 6.0 * 5.0 * 4.0 / 720.0f64).ln() + r * p.ln() + 6.0 * 0.8f64.ln();
        assert!((nb_log_pmf(y, r, p) - direct).abs() < 1e-12);
    }

    #[test]
    fn pmf_sums_to_one() {
        // r = 5, c = 0.025 => mean 200; summation oracle
        let c = 0.025;
        let p = c / (1.0 + c);
        let total: f64 = (0..=1_000_000u64).map(|y| nb_log_pmf(y, 5.0, p).exp()).sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let mean: f64 = (0..=1_000_000u64).map(|y| y as f64 * nb_log_pmf(y, 5.0, p).exp()).sum();
        assert!((mean - 200.0).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn state_one_ignores_lags() {
        let params = ParameterSet::published_means();
        let ctx = emission_rate(&params, 0, [100, 3, 40, 9], &intercept_only()).unwrap();
        assert_eq!(ctx.rho, 0.0);
        assert_eq!(ctx.r, params.a()[0]);
        assert!((ctx.mean() - params.a()[0] / params.c()).abs() < 1e-15);
    }

    #[test]
    fn published_zero_lag_means() {
        let params = ParameterSet::published_means();
        let x = intercept_only();
        let m: Vec<f64> = (0..3).map(|s| emission_rate(&params, s, [0; 4], &x).unwrap().mean()).collect();
        assert!((m[1] - 3.7033).abs() < 1e-3);
        assert!((m[2] - 238.6748).abs() < 1e-3);
        assert!((m[0] - 0.0163).abs() < 1e-3);
    }

    #[test]
    fn published_ar_coefficients() {
        let params = ParameterSet::published_means();
        let mut x = intercept_only();
        let base = emission_rate(&params, 2, [0; 4], &x).unwrap();
        assert!((base.ar_coefficient() - 0.8659).abs() < 1e-3);
        assert!(!base.is_explosive());
        x[1] = 1.0;
        let pre = emission_rate(&params, 2, [0; 4], &x).unwrap();
        assert!((pre.ar_coefficient() - 1.6753).abs() < 1e-3);
        assert!(pre.is_explosive());
    }

    #[test]
    fn overflow_is_an_error() {
        let params = ParameterSet::published_means();
        let mut x = intercept_only();
        x[7] = 1e4;
        assert!(matches!(emission_rate(&params, 2, [1; 4], &x), Err(Error::EmissionOverflow { state: 2 })));
    }

    #[test]
    fn sampler_matches_nb_moments() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (r, p) = (2.5, 0.2);
        let n = 200_000;
        let ys: Vec<f64> = (0..n).map(|_| sample_nb(&mut rng, r, p) as f64).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        let (m0, v0) = (r * (1.0 - p) / p, r * (1.0 - p) / (p * p));
        assert!((mean - m0).abs() < 4.0 * (v0 / n as f64).sqrt(), "{mean} vs {m0}");
        assert!((var / v0 - 1.0).abs() < 0.05, "{var} vs {v0}");
        assert_eq!(sample_nb(&mut rng, 0.0, 0.5), 0);
        assert_eq!(sample_nb(&mut rng, 1e-300, 0.5), 0);
    }
}
