//! Frank-Wolfe gap, lower bounds and the relative gap.

/// Rounding slack below which a negative FW gap is treated as zero.
pub const GAP_ROUNDING_TOL: f64 = 1e-9;

/// One row of the convergence trace, finalized after the k-th update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub k: usize,
    /// Seconds since the solver finished initialization.
    pub elapsed: f64,
    /// Potential at the new iterate `f^{k+1}` (the upper bound).
    pub psi: f64,
    pub fw_gap: f64,
    pub lb: f64,
    pub blb: f64,
    /// `None` while the best lower bound is not positive.
    pub rgap: Option<f64>,
    pub gamma: f64,
    /// History reset or degeneracy fallback happened this iteration.
    pub reset: bool,
}

/// `<grad, f> - <grad, s>`.
pub fn fw_gap(grad_dot_flow: f64, lp_value: f64) -> f64 {
    grad_dot_flow - lp_value
}

/// FW gap clamped at zero when the negative part is within rounding.
pub fn clamped_fw_gap(grad_dot_flow: f64, lp_value: f64) -> f64 {
    let g = fw_gap(grad_dot_flow, lp_value);
    if g < 0.0 && g >= -GAP_ROUNDING_TOL * grad_dot_flow.abs() {
        0.0
    } else {
        g
    }
}

pub fn lower_bound(psi: f64, gap: f64) -> f64 {
    psi - gap
}

/// Running maximum; start from `f64::NEG_INFINITY`.
pub fn update_best_lower_bound(blb: f64, lb: f64) -> f64 {
    blb.max(lb)
}

/// `(ubd - blb) / blb`, undefined unless `blb > 0`.
pub fn relative_gap(ubd: f64, blb: f64) -> Option<f64> {
    (blb > 0.0).then(|| (ubd - blb) / blb)
}

/// Accumulates the best lower bound across iterations.
#[derive(Debug, Clone, Copy)]
pub struct BoundTracker {
    blb: f64,
}

impl Default for BoundTracker {
    fn default() -> Self {
        Self {
            blb: f64::NEG_INFINITY,
        }
    }
}

impl BoundTracker {
    pub fn best(&self) -> f64 {
        self.blb
    }

    /// Folds in the lower bound at `f^k` and returns `(lb, blb)`.
    pub fn observe(&mut self, psi_k: f64, gap_k: f64) -> (f64, f64) {
        let lb = lower_bound(psi_k, gap_k);
        self.blb = update_best_lower_bound(self.blb, lb);
        (lb, self.blb)
    }
}

/// Running minimum of the FW gap over a trace.
pub fn min_gap_series(trace: &[ConvergenceRecord]) -> Vec<f64> {
    trace
        .iter()
        .scan(f64::INFINITY, |m, r| {
            *m = m.min(r.fw_gap);
            Some(*m)
        })
        .collect()
}
