//! N-conjugate direction: coefficients and direction assembly.
//!
//! With previous directions `d_m` (m = 1 is the most recent) and their step
//! sizes `gamma_m`, the new target is an affine combination
//! `s = a_0 s_fw + sum_m a_m s_m` whose coefficients make `d = s - f` conjugate
//! to every `d_m` under the diagonal Hessian `h`, assuming the `d_m` are
//! already mutually conjugate. Writing `A_m = <d_m, h d_fw>`,
//! `B_m = <d_m, h d_m>` and `a_m = b_m a_0`:
//!
//! ```text
//! b_N = -A_N / (B_N (1 - gamma_N))
//! b_m = -A_m / (B_m (1 - gamma_m)) + gamma_m / (1 - gamma_m) * sum_{n > m} b_n
//! a_0 = 1 / (1 + sum_m b_m)
//! ```

use std::collections::VecDeque;

use thiserror::Error;

use crate::cost::{hessian_quadratic_form, FlowVector};

pub const MIN_CURVATURE: f64 = 1e-30;
pub const MIN_STEP_COMPLEMENT: f64 = 1e-12;
pub const MAX_COEFFICIENT: f64 = 1e6;

/// A past step: direction taken and the step length along it.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub direction: FlowVector,
    pub gamma: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Degenerate {
    #[error("direction {0} has curvature {1} under the current Hessian")]
    FlatDirection(usize, f64),
    #[error("direction {0} was taken with step {1}")]
    FullStep(usize, f64),
    #[error("coefficient {0} = {1} is out of range")]
    Coefficient(usize, f64),
}

/// Coefficients `a_0..a_N` for `history` ordered most recent first.
/// Their sum is one up to rounding.
pub fn compute_nfw_coefficients<'a, I>(
    history: I,
    h: &[f64],
    d_fw: &[f64],
) -> Result<Vec<f64>, Degenerate>
where
    I: IntoIterator<Item = &'a HistoryEntry>,
    I::IntoIter: DoubleEndedIterator + ExactSizeIterator,
{
    let history = history.into_iter();
    let n = history.len();
    let mut betas = vec![0.0; n + 1];
    let mut suffix = 0.0;
    for (idx, entry) in history.enumerate().rev() {
        let m = idx + 1;
        let d = &entry.direction[..];
        let a = hessian_quadratic_form(h, d, d_fw).expect("history shape");
        let b = hessian_quadratic_form(h, d, d).expect("history shape");
        if !(b > MIN_CURVATURE) {
            return Err(Degenerate::FlatDirection(m, b));
        }
        let complement = 1.0 - entry.gamma;
        if !(complement.abs() > MIN_STEP_COMPLEMENT) {
            return Err(Degenerate::FullStep(m, entry.gamma));
        }
        let beta = -a / (b * complement) + entry.gamma / complement * suffix;
        betas[m] = beta;
        suffix += beta;
    }
    let alpha0 = 1.0 / (1.0 + suffix);
    let mut alphas = betas;
    alphas[0] = alpha0;
    for a in alphas.iter_mut().skip(1) {
        *a *= alpha0;
    }
    for (i, a) in alphas.iter().enumerate() {
        if !(a.abs() <= MAX_COEFFICIENT) {
            return Err(Degenerate::Coefficient(i, *a));
        }
    }
    Ok(alphas)
}

/// `d = a_0 d_fw + sum_m a_m (s_m - f)`, where `s_m - f` is rebuilt from the
/// history alone: `r_1 = (1 - gamma_1) d_1`, `r_m = r_{m-1} + (1 - gamma_m) d_m - d_{m-1}`.
pub fn assemble_nfw_direction(
    history: &VecDeque<HistoryEntry>,
    alphas: &[f64],
    d_fw: &[f64],
) -> FlowVector {
    assert_eq!(
        alphas.len(),
        history.len() + 1,
        "one coefficient per direction"
    );
    let mut d: Vec<f64> = d_fw.iter().map(|x| alphas[0] * x).collect();
    if history.is_empty() {
        return FlowVector::new(d);
    }
    let mut r = vec![0.0; d_fw.len()];
    for (idx, entry) in history.iter().enumerate() {
        let keep = 1.0 - entry.gamma;
        if idx == 0 {
            for (r, x) in r.iter_mut().zip(entry.direction.iter()) {
                *r = keep * x;
            }
        } else {
            let newer = &history[idx - 1].direction;
            for ((r, x), y) in r.iter_mut().zip(entry.direction.iter()).zip(newer.iter()) {
                *r += keep * x - y;
            }
        }
        let a = alphas[idx + 1];
        for (d, r) in d.iter_mut().zip(&r) {
            *d += a * r;
        }
    }
    FlowVector::new(d)
}
