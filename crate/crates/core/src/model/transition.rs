use crate::error::{Error, Result};
use crate::params::{ParameterSet, NUM_STATES, NUM_TRANSITIONS, TRANSITIONS};

pub type Matrix3 = [[f64; NUM_STATES]; NUM_STATES];

/// Row-stochastic 3×3 matrix built from covariate-linked log-rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub probs: Matrix3,
    /// `q1..q6`, one per off-diagonal transition in [`TRANSITIONS`] order.
    pub log_rates: [f64; NUM_TRANSITIONS],
}

impl TransitionMatrix {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.probs[from][to]
    }

    /// Off-diagonal probability relative to staying put: `P[from][to] / P[from][from]`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.probs[from][to] / self.probs[from][from]
    }
}

/// Log-rates `x · zeta_row` for all six transitions.
pub(crate) fn log_rates(zeta: &[f64], x: &[f64]) -> [f64; NUM_TRANSITIONS] {
    let d = x.len();
    let mut q = [0.0; NUM_TRANSITIONS];
    for (r, qr) in q.iter_mut().enumerate() {
        *qr = zeta[r * d..(r + 1) * d].iter().zip(x).map(|(z, v)| z * v).sum();
    }
    q
}

/// Row-wise multinomial logistic map with the diagonal as reference.
pub(crate) fn probs_from_rates(q: &[f64; NUM_TRANSITIONS]) -> Matrix3 {
    let mut p = [[0.0; NUM_STATES]; NUM_STATES];
    for (from, row) in p.iter_mut().enumerate() {
        let (ia, ib) = (2 * from, 2 * from + 1);
        let (ta, tb) = (TRANSITIONS[ia].1, TRANSITIONS[ib].1);
        let m = 0f64.max(q[ia]).max(q[ib]);
        let (e0, ea, eb) = ((-m).exp(), (q[ia] - m).exp(), (q[ib] - m).exp());
        let s = e0 + ea + eb;
        row[from] = e0 / s;
        row[ta] = ea / s;
        row[tb] = eb / s;
    }
    p
}

/// Transition matrix for one week's covariate vector.
pub fn transition_matrix(params: &ParameterSet, x: &[f64]) -> Result<TransitionMatrix> {
    let d = params.dim();
    if x.len() != d {
        return Err(Error::Invalid(format!("covariate vector has length {}, expected {d}", x.len())));
    }
    let q = log_rates(params.zeta(), x);
    for (r, qr) in q.iter().enumerate() {
        if !qr.is_finite() {
            let row = params.zeta_row(r);
            let index = (0..d)
                .find(|&j| !(row[j] * x[j]).is_finite())
                .unwrap_or_else(|| (0..d).max_by(|&i, &j| (row[i] * x[i]).abs().total_cmp(&(row[j] * x[j]).abs())).unwrap_or(0));
            return Err(Error::NonFiniteRate { index });
        }
    }
    Ok(TransitionMatrix { probs: probs_from_rates(&q), log_rates: q })
}
