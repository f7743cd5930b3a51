//! Quantities quoted alongside the published posterior means.

use cfhmm_core::model::{emission_rate, transition_matrix};
use cfhmm_core::ParameterSet;

fn baseline(params: &ParameterSet) -> Vec<f64> {
    let mut x = vec![0.0; params.dim()];
    x[0] = 1.0;
    x
}

fn with_flag(params: &ParameterSet, name: &str) -> Vec<f64> {
    let mut x = baseline(params);
    x[params.covariate_index(name).unwrap()] = 1.0;
    x
}

#[test]
fn zero_lag_means_at_table_precision() {
    // a1 is tabulated to one significant digit, so a1/c is only good to ~1e-3 absolute
    let params = ParameterSet::published_means();
    let x = baseline(&params);
    for (s, want) in [0.0163, 3.7033, 238.6748].into_iter().enumerate() {
        let got = emission_rate(&params, s, [0; 4], &x).unwrap().mean();
        assert!((got - want).abs() <= 1e-3, "state {}: {got} vs {want}", s + 1);
    }
}

#[test]
fn ceasefire_multiplies_two_to_one_rate_by_exp_coefficient() {
    let params = ParameterSet::published_means();
    let base = transition_matrix(&params, &baseline(&params)).unwrap();
    let cf = transition_matrix(&params, &with_flag(&params, "cf")).unwrap();
    let rate_ratio = cf.rate(1, 0) / base.rate(1, 0);
    assert!((rate_ratio - 1.243f64.exp()).abs() < 1e-12);
    assert!((rate_ratio - 3.5).abs() <= 0.1, "{rate_ratio}");
    // the probability itself rises by a little less, the diagonal also moving
    let prob_ratio = cf.get(1, 0) / base.get(1, 0);
    assert!(prob_ratio > 3.3 && prob_ratio < rate_ratio, "{prob_ratio}");
}

#[test]
fn state_one_exit_probabilities_and_flag_factors() {
    let params = ParameterSet::published_means();
    let base = transition_matrix(&params, &baseline(&params)).unwrap();
    assert!((base.get(0, 1) - 0.0006276).abs() < 5e-7, "{}", base.get(0, 1));
    assert!((base.get(0, 2) - 6e-7).abs() < 5e-8, "{}", base.get(0, 2));
    let pre = transition_matrix(&params, &with_flag(&params, "pre_cf")).unwrap();
    let cf = transition_matrix(&params, &with_flag(&params, "cf")).unwrap();
    assert!((pre.get(0, 1) / base.get(0, 1) - 52.0).abs() < 1.0);
    assert!((cf.get(0, 1) / base.get(0, 1) - 18.0).abs() < 0.5);
}

#[test]
fn state_three_row_and_autoregression() {
    let params = ParameterSet::published_means();
    let row = transition_matrix(&params, &baseline(&params)).unwrap().probs[2];
    for (got, want) in row.iter().zip([0.0916, 0.6628, 0.2456]) {
        assert!((got - want).abs() <= 5e-4);
    }
    let base = emission_rate(&params, 2, [0; 4], &baseline(&params)).unwrap();
    let pre = emission_rate(&params, 2, [0; 4], &with_flag(&params, "pre_cf")).unwrap();
    assert!((base.ar_coefficient() - 0.8659).abs() <= 1e-3 && !base.is_explosive());
    assert!((pre.ar_coefficient() - 1.6753).abs() <= 1e-3 && pre.is_explosive());
}
