//! Log posterior: summed country likelihoods plus independent Gaussian priors
//! on the unconstrained coordinates, truncated by the ordering constraints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CountryPanel;
use crate::error::{Error, Result};
use crate::model::likelihood::{forward, Factors, PanelData};
use crate::model::transition::Matrix3;
use crate::params::{Layout, ParameterSet, Theta, NUM_STATES};

pub const DEFAULT_PRIOR_SD: f64 = 20.0;

/// Zero-mean Gaussian prior, one standard deviation per unconstrained coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub sd: Vec<f64>,
}

impl PriorSpec {
    pub fn uniform(sd: f64, coordinates: usize) -> Result<Self> {
        Self::new(vec![sd; coordinates])
    }

    pub fn new(sd: Vec<f64>) -> Result<Self> {
        if sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Invalid("prior standard deviations must be positive".into()));
        }
        Ok(PriorSpec { sd })
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
        theta
            .iter()
            .zip(&self.sd)
            .map(|(t, s)| -0.5 * (t / s).powi(2) - s.ln() - LN_SQRT_2PI)
            .sum()
    }
}

/// Log posterior at a valid parameter set.
pub fn log_posterior(params: &ParameterSet, panels: &[CountryPanel], prior: &PriorSpec) -> Result<f64> {
    let target = PosteriorTarget::new(params.covariates().to_vec(), panels, prior.clone())?;
    Ok(target.log_posterior(&params.to_unconstrained().0))
}

/// Posterior over unconstrained coordinates with precomputed panel data.
#[derive(Debug, Clone)]
pub struct PosteriorTarget {
    covariates: Vec<String>,
    layout: Layout,
    data: Vec<PanelData>,
    prior: PriorSpec,
}

impl PosteriorTarget {
    pub fn new(covariates: Vec<String>, panels: &[CountryPanel], prior: PriorSpec) -> Result<Self> {
        let layout = Layout::new(covariates.len());
        if prior.sd.len() != layout.len() {
            return Err(Error::Invalid(format!(
                "prior has {} standard deviations, model has {} coordinates",
                prior.sd.len(),
                layout.len()
            )));
        }
        let mut data = Vec::with_capacity(panels.len());
        for p in panels {
            if p.covariates != covariates {
                return Err(Error::Invalid(format!("panel `{}` uses a different covariate design", p.country_id)));
            }
            data.push(PanelData::new(p)?);
        }
        Ok(PosteriorTarget { covariates, layout, data, prior })
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn num_coordinates(&self) -> usize {
        self.layout.len()
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn panels(&self) -> &[PanelData] {
        &self.data
    }

    /// `None` when the point violates the ordering constraints.
    pub fn params(&self, theta: &[f64]) -> Option<ParameterSet> {
        if !self.layout.satisfies_constraints(theta) {
            return None;
        }
        ParameterSet::from_unconstrained(&self.covariates, &Theta(theta.to_vec())).ok()
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.prior.log_density(theta)
    }

    /// Full recomputation; −∞ outside the support.
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        let Some(params) = self.params(theta) else {
            return f64::NEG_INFINITY;
        };
        let lls: Vec<f64> = self
            .data
            .par_iter()
            .map(|d| {
                let mut f = Factors::new(d.n);
                f.fill_initial(&params);
                f.fill_transitions(params.zeta(), d);
                f.fill_emissions(&params, d);
                f.log_likelihood()
            })
            .collect();
        finite_or_neg_inf(self.log_prior(theta) + lls.iter().sum::<f64>())
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Which factor groups a block of coordinates touches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Touches {
    pub transitions: bool,
    pub emissions: bool,
    pub initial: bool,
}

impl Touches {
    pub fn of(layout: &Layout, indices: &[usize]) -> Self {
        let mut t = Touches::default();
        for &i in indices {
            if layout.zeta_range().contains(&i) {
                t.transitions = true;
            } else if i >= layout.pi {
                t.initial = true;
            } else {
                t.emissions = true;
            }
        }
        t
    }
}

#[derive(Debug, Clone)]
struct PanelCache {
    init: [f64; NUM_STATES],
    trans: Vec<Matrix3>,
    emit: Vec<[f64; NUM_STATES]>,
    scale: Vec<f64>,
    ll: f64,
}

/// Incremental evaluator: keeps the factors of the current point and only
/// recomputes the groups a proposal changes.
#[derive(Debug, Clone)]
pub struct CachedPosterior {
    current: Vec<PanelCache>,
    proposal: Vec<PanelCache>,
    theta: Vec<f64>,
    log_prior: f64,
    log_post: f64,
    pending: Option<(Touches, f64, f64)>,
}

impl CachedPosterior {
    pub fn new(target: &PosteriorTarget, theta: &[f64]) -> Self {
        let params = target.params(theta);
        let current: Vec<PanelCache> = target
            .data
            .iter()
            .map(|d| {
                let mut f = Factors::new(d.n);
                let ll = match &params {
                    Some(p) => {
                        f.fill_initial(p);
                        f.fill_transitions(p.zeta(), d);
                        f.fill_emissions(p, d);
                        f.log_likelihood()
                    }
                    None => f64::NEG_INFINITY,
                };
                PanelCache { init: f.init, trans: f.trans, emit: f.emit, scale: f.scale, ll }
            })
            .collect();
        let log_prior = target.log_prior(theta);
        let log_post = if params.is_some() {
            finite_or_neg_inf(log_prior + current.iter().map(|c| c.ll).sum::<f64>())
        } else {
            f64::NEG_INFINITY
        };
        CachedPosterior {
            proposal: current.clone(),
            current,
            theta: theta.to_vec(),
            log_prior,
            log_post,
            pending: None,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_post
    }

    /// Evaluate a proposal that differs from the current point only in the
    /// coordinates summarized by `touches`. Call [`CachedPosterior::accept`]
    /// to move to it.
    pub fn propose(&mut self, target: &PosteriorTarget, theta: &[f64], touches: Touches) -> f64 {
        let Some(params) = target.params(theta) else {
            self.pending = None;
            return f64::NEG_INFINITY;
        };
        let lls: Vec<f64> = self
            .proposal
            .par_iter_mut()
            .zip(self.current.par_iter())
            .zip(target.data.par_iter())
            .map(|((prop, cur), d)| {
                let init = if touches.initial { params.pi() } else { cur.init };
                prop.init = init;
                let trans = if touches.transitions {
                    let mut f = Factors { init, trans: std::mem::take(&mut prop.trans), emit: vec![], scale: vec![] };
                    f.fill_transitions(params.zeta(), d);
                    prop.trans = f.trans;
                    &prop.trans
                } else {
                    &cur.trans
                };
                let (emit, scale) = if touches.emissions {
                    let mut f = Factors {
                        init,
                        trans: vec![],
                        emit: std::mem::take(&mut prop.emit),
                        scale: std::mem::take(&mut prop.scale),
                    };
                    f.fill_emissions(&params, d);
                    prop.emit = f.emit;
                    prop.scale = f.scale;
                    (&prop.emit, &prop.scale)
                } else {
                    (&cur.emit, &cur.scale)
                };
                let ll = forward(&init, trans, emit, scale);
                prop.ll = ll;
                ll
            })
            .collect();
        let log_prior = target.log_prior(theta);
        let lp = finite_or_neg_inf(log_prior + lls.iter().sum::<f64>());
        self.pending = Some((touches, log_prior, lp));
        lp
    }

    /// Move to the most recently proposed point.
    pub fn accept(&mut self, theta: &[f64]) {
        let (touches, log_prior, lp) = self.pending.take().expect("accept follows a finite proposal");
        for (cur, prop) in self.current.iter_mut().zip(self.proposal.iter_mut()) {
            cur.init = prop.init;
            if touches.transitions {
                std::mem::swap(&mut cur.trans, &mut prop.trans);
            }
            if touches.emissions {
                std::mem::swap(&mut cur.emit, &mut prop.emit);
                std::mem::swap(&mut cur.scale, &mut prop.scale);
            }
            cur.ll = prop.ll;
        }
        self.theta.copy_from_slice(theta);
        self.log_prior = log_prior;
        self.log_post = lp;
    }
}
