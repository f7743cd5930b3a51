//! Shared fixtures for the benchmarks.

use cfhmm_core::params::FULL_DESIGN;
use cfhmm_core::synthetic::{generate_skeletons, simulate_panels, GeneratorSpec, SkeletonSpec};
use cfhmm_core::{CountryPanel, ParameterSet};

/// Published parameters and `countries` simulated panels of `weeks` weeks.
pub fn published_panels(countries: usize, weeks: usize, seed: u64) -> (ParameterSet, Vec<CountryPanel>) {
    let params = ParameterSet::published_means();
    let design: Vec<String> = FULL_DESIGN.iter().map(|s| s.to_string()).collect();
    let spec = SkeletonSpec { countries, weeks, seed, ..SkeletonSpec::default() };
    let (skeletons, _) = generate_skeletons(&spec, &design).expect("skeletons");
    let panels = simulate_panels(&GeneratorSpec::new(params.clone()), &skeletons, seed).expect("simulation");
    (params, panels)
}

/// First `n` weeks of `panel`.
pub fn truncate(panel: &CountryPanel, n: usize) -> CountryPanel {
    let d = panel.dim();
    CountryPanel {
        weeks: panel.weeks[..n].to_vec(),
        deaths: panel.deaths[..n].to_vec(),
        x: panel.x[..n * d].to_vec(),
        labels: vec![false; n],
        population: panel.population.as_ref().map(|p| p[..n].to_vec()),
        ..panel.clone()
    }
}
