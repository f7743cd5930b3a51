mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfhmm_core::data::io::{read_panels_from, write_panels};
use cfhmm_core::model::{brute_force_log_likelihood, marginal_log_likelihood, sample_nb, transition_matrix, Factors, PanelData};
use cfhmm_core::params::num_coordinates;
use cfhmm_core::posterior::{log_posterior, PriorSpec};

use common::{random_panel, random_params};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn panel_csv_round_trips(seed in any::<u64>(), d in 1usize..=8, n in 5usize..40, countries in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let panels: Vec<_> = (0..countries).map(|i| random_panel(&mut rng, &format!("C{i}"), d, n, 0.5)).collect();
        let mut buf = Vec::new();
        write_panels(&mut buf, &panels).unwrap();
        let back = read_panels_from(&buf[..], "panels.csv").unwrap();
        prop_assert_eq!(back, panels);
    }

    #[test]
    fn transition_rows_are_stochastic(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, d);
        let panel = random_panel(&mut rng, "T", d, 10, 0.0);
        for k in 0..panel.len() {
            let m = transition_matrix(&params, panel.x_row(k)).unwrap();
            for row in m.probs {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|p| *p >= 0.0));
            }
        }
    }

    #[test]
    fn labelled_forward_matches_restricted_enumeration(seed in any::<u64>(), n in 5usize..=9, label_prob in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, 4);
        let panel = random_panel(&mut rng, "L", 4, n, label_prob);
        let fast = marginal_log_likelihood(&params, &panel).unwrap();
        let slow = brute_force_log_likelihood(&params, &panel).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs(), "{} vs {}", fast, slow);
        let free = marginal_log_likelihood(&params, &cfhmm_core::CountryPanel { labels: vec![false; n], ..panel }).unwrap();
        prop_assert!(fast <= free + 1e-12);
    }

    #[test]
    fn scaling_one_week_shifts_log_likelihood(seed in any::<u64>(), week in 0usize..30, log_kappa in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, 3);
        let panel = random_panel(&mut rng, "S", 3, 30, 0.0);
        let data = PanelData::new(&panel).unwrap();
        let f = Factors::compute(&params, &data).unwrap();
        let mut g = f.clone();
        g.emit[week] = g.emit[week].map(|e| e * log_kappa.exp());
        let shift = g.log_likelihood() - f.log_likelihood();
        prop_assert!((shift - log_kappa).abs() < 1e-9, "{} vs {}", shift, log_kappa);
    }

    #[test]
    fn posterior_is_additive_over_panels(seed in any::<u64>(), split in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, 3);
        let panels: Vec<_> = (0..4).map(|i| random_panel(&mut rng, &format!("P{i}"), 3, 20, 0.3)).collect();
        let prior = PriorSpec::uniform(20.0, num_coordinates(3)).unwrap();
        let lp = |ps: &[cfhmm_core::CountryPanel]| log_posterior(&params, ps, &prior).unwrap();
        let p0 = lp(&[]);
        let whole = lp(&panels) - p0;
        let parts = (lp(&panels[..split]) - p0) + (lp(&panels[split..]) - p0);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
    }

    #[test]
    fn diffuse_prior_leaves_likelihood_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (random_params(&mut rng, 2), random_params(&mut rng, 2));
        let panels: Vec<_> = (0..2).map(|i| random_panel(&mut rng, &format!("D{i}"), 2, 15, 0.3)).collect();
        let ll = |x| panels.iter().map(|pn| marginal_log_likelihood(x, pn).unwrap()).sum::<f64>();
        let target = ll(&p) - ll(&q);
        let mut last = f64::INFINITY;
        for sd in [20.0, 1e3, 1e6] {
            let prior = PriorSpec::uniform(sd, num_coordinates(2)).unwrap();
            let diff = log_posterior(&p, &panels, &prior).unwrap() - log_posterior(&q, &panels, &prior).unwrap();
            let gap = (diff - target).abs();
            prop_assert!(gap <= last + 1e-9);
            last = gap;
        }
        prop_assert!(last < 1e-6);
    }
}

#[test]
fn nb_draws_have_conditional_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (r, c) in [(0.4, 0.05), (3.0, 0.5), (25.0, 0.1)] {
        let p = c / (1.0 + c);
        let n = 1_000_000;
        let ys: Vec<f64> = (0..n).map(|_| sample_nb(&mut rng, r, p) as f64).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - r / c).abs() <= 3.0 * se, "r={r} c={c}: {mean} vs {}", r / c);
    }
}
