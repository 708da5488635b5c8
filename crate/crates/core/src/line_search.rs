//! Exact minimization of `gamma -> potential(f + gamma d)` over `[0, 1]`.
//!
//! The derivative `phi'(gamma) = <cost(f + gamma d), d>` is nondecreasing, so
//! bisection on its sign converges to the minimizer.

use thiserror::Error;

use crate::network::Network;
use crate::numeric::{self, CompensatedSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineSearchError {
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("NaN in flow or direction")]
    NotANumber,
    #[error("vector lengths {flow} and {direction} do not match edge count {edges}")]
    Shape {
        flow: usize,
        direction: usize,
        edges: usize,
    },
    #[error("edge {edge}: segment leaves the nonnegative orthant (flow {value} at gamma {gamma})")]
    InfeasibleSegment { edge: usize, value: f64, gamma: f64 },
}

/// Relative threshold below which negative flows along a segment count as rounding noise.
pub const NEGATIVE_FLOW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOptions {
    /// Stop once `|phi'(gamma)| <= derivative_tol * |phi'(0)|`.
    pub derivative_tol: f64,
    /// Stop once the bracket is narrower than this.
    pub bracket_tol: f64,
    pub max_iter: usize,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self {
            derivative_tol: 1e-10,
            bracket_tol: 1e-12,
            max_iter: 60,
        }
    }
}

impl LineSearchOptions {
    pub fn with_tol(derivative_tol: f64) -> Self {
        Self {
            derivative_tol,
            ..Self::default()
        }
    }
}

/// Accepted step and the number of derivative evaluations used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub gamma: f64,
    pub evaluations: usize,
}

struct Segment<'a> {
    net: &'a Network,
    flow: &'a [f64],
    direction: &'a [f64],
    floor: f64,
}

impl Segment<'_> {
    fn derivative(&self, gamma: f64) -> Result<f64, LineSearchError> {
        let mut acc = CompensatedSum::new();
        for (i, ((e, &f), &d)) in self
            .net
            .edges()
            .iter()
            .zip(self.flow)
            .zip(self.direction)
            .enumerate()
        {
            let mut x = f + gamma * d;
            if x < 0.0 {
                if x < -self.floor {
                    return Err(LineSearchError::InfeasibleSegment {
                        edge: i,
                        value: x,
                        gamma,
                    });
                }
                x = 0.0;
            }
            acc.add(e.cost(x) * d);
        }
        Ok(acc.value())
    }
}

/// Minimizer of the potential along `flow + gamma * direction`, `gamma` in `[0, 1]`.
pub fn line_search(
    net: &Network,
    flow: &[f64],
    direction: &[f64],
    options: &LineSearchOptions,
) -> Result<LineSearchOutcome, LineSearchError> {
    if !(options.derivative_tol > 0.0) {
        return Err(LineSearchError::InvalidTolerance(options.derivative_tol));
    }
    if !(options.bracket_tol > 0.0) {
        return Err(LineSearchError::InvalidTolerance(options.bracket_tol));
    }
    if flow.len() != net.edge_count() || direction.len() != net.edge_count() {
        return Err(LineSearchError::Shape {
            flow: flow.len(),
            direction: direction.len(),
            edges: net.edge_count(),
        });
    }
    if flow.iter().chain(direction).any(|v| v.is_nan()) {
        return Err(LineSearchError::NotANumber);
    }
    let seg = Segment {
        net,
        flow,
        direction,
        floor: NEGATIVE_FLOW_TOLERANCE * numeric::max_abs(flow),
    };

    let d0 = seg.derivative(0.0)?;
    if !(d0 < 0.0) {
        return Ok(LineSearchOutcome {
            gamma: 0.0,
            evaluations: 1,
        });
    }
    let d1 = seg.derivative(1.0)?;
    if d1 <= 0.0 {
        return Ok(LineSearchOutcome {
            gamma: 1.0,
            evaluations: 2,
        });
    }

    let target = options.derivative_tol * d0.abs();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut evaluations = 2;
    for _ in 0..options.max_iter {
        if hi - lo <= options.bracket_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = seg.derivative(mid)?;
        evaluations += 1;
        if g.abs() <= target {
            return Ok(LineSearchOutcome {
                gamma: mid,
                evaluations,
            });
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LineSearchOutcome {
        gamma: 0.5 * (lo + hi),
        evaluations,
    })
}

/// Step rule: exact line search or the classic `2 / (k + 1)` schedule, capped at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepPolicy {
    #[default]
    LineSearch,
    Harmonic,
}

impl StepPolicy {
    pub fn harmonic_step(k: usize) -> f64 {
        (2.0 / (k as f64 + 1.0)).min(1.0)
    }
}
