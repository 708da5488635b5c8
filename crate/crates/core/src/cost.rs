//! BPR link costs and the Beckmann potential.
//!
//! For an edge with free-flow time `t`, capacity `c`, coefficient `b` and power `p`:
//!
//! ```text
//! cost(f)      = t (1 + b (f/c)^p)
//! integral(f)  = t f + t b c / (p + 1) (f/c)^(p + 1)
//! derivative(f) = t b p f^(p - 1) / c^p
//! ```
//!
//! The potential is separable, so its Hessian is diagonal and the gradient is the
//! cost vector itself.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

use crate::network::{Edge, Network};
use crate::numeric;

/// Flow floor used when evaluating the derivative of a cost with power below one.
pub const HESSIAN_FLOW_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("edge {edge}: flow {value} is negative or NaN")]
    InvalidFlow { edge: usize, value: f64 },
    #[error("vector length {found} does not match edge count {expected}")]
    Shape { expected: usize, found: usize },
}

macro_rules! edge_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }
    };
}

edge_vector!(
    /// Edge-indexed flows. Also used for directions, which may be negative.
    FlowVector
);
edge_vector!(
    /// Edge-indexed travel times.
    CostVector
);

impl FlowVector {
    /// `self + step * direction`, entrywise.
    pub fn step(&self, step: f64, direction: &[f64]) -> FlowVector {
        FlowVector(
            self.iter()
                .zip(direction)
                .map(|(f, d)| f + step * d)
                .collect(),
        )
    }

    /// `target - self`, entrywise.
    pub fn towards(&self, target: &[f64]) -> FlowVector {
        FlowVector(target.iter().zip(self.iter()).map(|(s, f)| s - f).collect())
    }
}

impl Edge {
    #[inline]
    pub fn cost(&self, flow: f64) -> f64 {
        self.free_flow_time * (1.0 + self.bpr_coeff * (flow / self.capacity).powf(self.bpr_power))
    }

    /// Integral of [`Edge::cost`] from 0 to `flow`.
    #[inline]
    pub fn cost_integral(&self, flow: f64) -> f64 {
        let p1 = self.bpr_power + 1.0;
        self.free_flow_time * flow
            + self.free_flow_time * self.bpr_coeff * self.capacity / p1
                * (flow / self.capacity).powf(p1)
    }

    #[inline]
    pub fn cost_derivative(&self, flow: f64) -> f64 {
        let p = self.bpr_power;
        if p == 0.0 || self.bpr_coeff == 0.0 {
            return 0.0;
        }
        let flow = if p < 1.0 {
            flow.max(HESSIAN_FLOW_FLOOR)
        } else {
            flow
        };
        self.free_flow_time * self.bpr_coeff * p * flow.powf(p - 1.0) / self.capacity.powf(p)
    }
}

fn check_flows(net: &Network, f: &[f64]) -> Result<(), CostError> {
    if f.len() != net.edge_count() {
        return Err(CostError::Shape {
            expected: net.edge_count(),
            found: f.len(),
        });
    }
    match f.iter().position(|v| !(*v >= 0.0)) {
        Some(edge) => Err(CostError::InvalidFlow {
            edge,
            value: f[edge],
        }),
        None => Ok(()),
    }
}

/// Travel time of every edge; equals the gradient of [`potential`].
pub fn edge_costs(net: &Network, f: &[f64]) -> Result<CostVector, CostError> {
    check_flows(net, f)?;
    Ok(CostVector(
        net.edges().iter().zip(f).map(|(e, &x)| e.cost(x)).collect(),
    ))
}

/// Beckmann potential: sum over edges of the integrated cost.
pub fn potential(net: &Network, f: &[f64]) -> Result<f64, CostError> {
    check_flows(net, f)?;
    Ok(numeric::sum(
        net.edges().iter().zip(f).map(|(e, &x)| e.cost_integral(x)),
    ))
}

/// Diagonal of the Hessian of the potential.
pub fn hessian_diag(net: &Network, f: &[f64]) -> Result<Vec<f64>, CostError> {
    check_flows(net, f)?;
    Ok(net
        .edges()
        .iter()
        .zip(f)
        .map(|(e, &x)| e.cost_derivative(x))
        .collect())
}

/// `sum_e h_e a_e b_e`.
pub fn hessian_quadratic_form(h: &[f64], a: &[f64], b: &[f64]) -> Result<f64, CostError> {
    for v in [a, b] {
        if v.len() != h.len() {
            return Err(CostError::Shape {
                expected: h.len(),
                found: v.len(),
            });
        }
    }
    Ok(numeric::sum(
        h.iter().zip(a).zip(b).map(|((h, a), b)| h * a * b),
    ))
}
