use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::CountryPanel;
use crate::params::ParameterSet;

pub fn design(d: usize) -> Vec<String> {
    crate::params::FULL_DESIGN[..d].iter().map(|s| s.to_string()).collect()
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
    let mut pi = [w[0] / s, w[1] / s, 0.0];
    pi[2] = 1.0 - pi[0] - pi[1];
    ParameterSet::new(design(d), zeta, beta, a, c, pi).unwrap()
}

/// Panel with heavy-tailed random counts and random labels on zero weeks.
pub fn random_panel<R: Rng>(rng: &mut R, params: &ParameterSet, n: usize, label_prob: f64) -> CountryPanel {
    let d = params.dim();
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
            let v: f64 = if j < 3 { f64::from(u8::from(rng.random_bool(0.2))) } else { StandardNormal.sample(rng) };
            x.push(v);
        }
    }
    let labels = deaths.iter().map(|_| rng.random_bool(label_prob)).collect();
    CountryPanel {
        country_id: "T".into(),
        weeks: (0..n).map(|k| start + chrono::Duration::weeks(k as i64)).collect(),
        deaths,
        covariates: params.covariates().to_vec(),
        x,
        labels,
        population: None,
    }
}
