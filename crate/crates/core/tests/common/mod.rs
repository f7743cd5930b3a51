#![allow(dead_code)]

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use cfhmm_core::params::full_design;
use cfhmm_core::{CountryPanel, ParameterSet};

pub fn design(d: usize) -> Vec<String> {
    full_design()[..d].to_vec()
}

/// Constraint-satisfying parameters of moderate magnitude.
pub fn random_params<R: Rng>(rng: &mut R, d: usize) -> ParameterSet {
    let mut normal = |s: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        s * z
    };
    let mut zeta: Vec<f64> = (0..6 * d).map(|_| normal(0.6)).collect();
    for r in 0..6 {
        zeta[r * d] = -1.5 + normal(0.8);
    }
    let mut beta: Vec<f64> = (0..2 * d).map(|_| normal(0.3)).collect();
    beta[0] = -1.5 + normal(0.5);
    beta[d] = -1.0 + normal(0.5);
    if beta[d] < beta[0] {
        beta.swap(0, d);
    }
    let mut a = [(-4.0 + normal(1.0)).exp(), (-1.0 + normal(0.5)).exp(), (1.0 + normal(0.5)).exp()];
    a.sort_by(f64::total_cmp);
    let c = (-1.5 + normal(0.4)).exp();
    let w = [1.0, rng.random::<f64>() * 0.5 + 0.05, rng.random::<f64>() * 0.5 + 0.05];
    let s: f64 = w.iter().sum();
    let pi = [w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s];
    ParameterSet::new(design(d), zeta, beta, a, c, pi).unwrap()
}

/// Heavy-tailed counts, binary flags, normal continuous covariates and
/// labels on a share of the low-count weeks.
pub fn random_panel<R: Rng>(rng: &mut R, id: &str, d: usize, n: usize, label_prob: f64) -> CountryPanel {
    let start = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
    let deaths: Vec<u64> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=4 => 0,
            5..=7 => rng.random_range(1..5),
            8 => rng.random_range(5..40),
            _ => rng.random_range(40..400),
        })
        .collect();
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        x.push(1.0);
        for j in 1..d {
            x.push(if j < 3 { f64::from(u8::from(rng.random_bool(0.2))) } else { StandardNormal.sample(rng) });
        }
    }
    let labels = deaths.iter().map(|&y| y < 5 && rng.random_bool(label_prob)).collect();
    CountryPanel {
        country_id: id.into(),
        weeks: (0..n).map(|k| start + chrono::Duration::weeks(k as i64)).collect(),
        deaths,
        covariates: design(d),
        x,
        labels,
        population: None,
    }
}

/// Four-covariate truth with frequent state changes.
pub fn desk_truth() -> ParameterSet {
    let covariates: Vec<String> = ["intercept", "cf", "v2x", "log_gdp"].iter().map(|s| s.to_string()).collect();
    #[rustfmt::skip]
    let zeta = vec![
        -3.0, 0.8,  0.3, -0.2,
        -3.8, 0.3,  0.2,  0.1,
        -2.5, 1.2, -0.3,  0.2,
        -2.5, 0.3,  0.2, -0.1,
        -3.0, 0.5,  0.0,  0.2,
        -1.0, 0.2,  0.1, -0.2,
    ];
    let beta = vec![-1.5, -0.1, 0.2, 0.1, -0.8, 0.2, 0.3, 0.1];
    ParameterSet::new(covariates, zeta, beta, [0.02, 1.0, 20.0], 0.5, [0.8, 0.12, 0.08]).unwrap()
}
