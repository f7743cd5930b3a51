mod common;

use cfhmm_core::mcmc::{fit_target, initialize, McmcConfig, ProposalKind};
use cfhmm_core::params::num_coordinates;
use cfhmm_core::posterior::{PosteriorTarget, PriorSpec};
use cfhmm_core::synthetic::{generate_skeletons, simulate_panels, GeneratorSpec, SkeletonSpec};

#[test]
fn posterior_means_recover_generating_parameters() {
    let truth = common::desk_truth();
    let spec = SkeletonSpec { countries: 10, weeks: 200, ceasefires_per_year: 2.0, seed: 8, ..SkeletonSpec::default() };
    let (skeletons, _) = generate_skeletons(&spec, truth.covariates()).unwrap();
    let panels = simulate_panels(&GeneratorSpec::new(truth.clone()), &skeletons, 8).unwrap();
    let prior = PriorSpec::uniform(20.0, num_coordinates(truth.dim())).unwrap();
    let target = PosteriorTarget::new(truth.covariates().to_vec(), &panels, prior).unwrap();
    assert!(target.log_posterior(&initialize(&target, 8).unwrap().to_unconstrained().0).is_finite());

    let config = McmcConfig {
        n_burnin: 10_000,
        n_iterations: 30_000,
        thin: 10,
        seed: 8,
        groups: Some(vec![(0..8).collect(), (8..16).collect(), (16..24).collect(), (24..36).collect(), (36..38).collect()]),
        initial_step: vec![0.05; 5],
        proposal: ProposalKind::Covariance,
        ..McmcConfig::default()
    };
    let draws = fit_target(&target, &config, None).unwrap();
    let s = draws.summary();
    let t = truth.constrained_values();
    let close = (0..t.len()).filter(|&j| (s.mean[j] - t[j]).abs() <= 3.0 * s.sd[j]).count();
    assert!(close as f64 >= 0.95 * t.len() as f64, "{close} of {} within 3 sd", t.len());
    for a in &draws.chains[0].post_burnin_acceptance {
        assert!((0.25..=0.55).contains(a), "{a}");
    }
}
