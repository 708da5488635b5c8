//! Iteration engine shared by FW, CFW, FFW, WFFW and NFW.
//!
//! Every variant computes the all-or-nothing target at the current costs,
//! builds its own direction from it, and takes an exactly line-searched step.
//! Iterates stay feasible because each one is an affine combination of
//! all-or-nothing loadings that remains nonnegative.

mod config;
pub mod nfw;
mod variants;

use std::time::Instant;

use thiserror::Error;

pub use config::{Algorithm, CfwDenominator, ConfigError, SolverConfig, UnknownAlgorithm};
pub use variants::{FfwChoice, CFW_MIN_DENOMINATOR};

use crate::assignment::{all_or_nothing, AssignError};
use crate::cost::{edge_costs, potential, CostError, FlowVector};
use crate::line_search::{line_search, LineSearchError, StepPolicy, NEGATIVE_FLOW_TOLERANCE};
use crate::metrics::{clamped_fw_gap, relative_gap, BoundTracker, ConvergenceRecord};
use crate::network::{DemandMatrix, Network};
use crate::numeric;
use variants::{StepInput, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveErrorKind {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    LineSearch(#[from] LineSearchError),
}

/// A fatal error together with the iterations completed before it.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("solver failed after {} iterations: {kind}", trace.len())]
pub struct SolveError {
    pub kind: SolveErrorKind,
    pub trace: Vec<ConvergenceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RgapTol,
    MaxIter,
    TimeBudget,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::RgapTol => "rgap_tol",
            Termination::MaxIter => "max_iter",
            Termination::TimeBudget => "time_budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub flow: FlowVector,
    pub termination: Termination,
    pub trace: Vec<ConvergenceRecord>,
    /// Relative gap of the last record; zero when there was no demand to assign.
    pub final_rgap: Option<f64>,
}

impl AlgorithmResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Solver state positioned at iterate `f^k`.
pub struct Solver<'a> {
    net: &'a Network,
    dm: &'a DemandMatrix,
    config: SolverConfig,
    k: usize,
    flow: FlowVector,
    psi: f64,
    bounds: BoundTracker,
    variant: Variant,
    last_direction: Option<FlowVector>,
    started: Instant,
}

impl<'a> Solver<'a> {
    /// Starts from the all-or-nothing loading at free-flow costs.
    pub fn new(
        net: &'a Network,
        dm: &'a DemandMatrix,
        config: SolverConfig,
    ) -> Result<Self, SolveErrorKind> {
        config.validate()?;
        let f0 = all_or_nothing(net, dm, &net.free_flow_costs())?.flow;
        let psi = potential(net, &f0)?;
        let variant = Variant::new(&config, &f0);
        Ok(Self {
            net,
            dm,
            config,
            k: 0,
            flow: f0,
            psi,
            bounds: BoundTracker::default(),
            variant,
            last_direction: None,
            started: Instant::now(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn flow(&self) -> &FlowVector {
        &self.flow
    }

    /// Potential at the current iterate.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Direction used by the most recent step.
    pub fn last_direction(&self) -> Option<&FlowVector> {
        self.last_direction.as_ref()
    }

    /// Number of stored NFW directions the next step conjugates against.
    pub fn n_curr(&self) -> Option<usize> {
        self.variant.n_curr()
    }

    /// Coefficient used by the most recent CFW step.
    pub fn cfw_alpha(&self) -> Option<f64> {
        match &self.variant {
            Variant::Cfw(s) => s.last_alpha,
            _ => None,
        }
    }

    /// CFW accumulated target.
    pub fn cfw_target(&self) -> Option<&FlowVector> {
        match &self.variant {
            Variant::Cfw(s) => Some(&s.x_star),
            _ => None,
        }
    }

    /// WFFW smoothed target.
    pub fn wffw_target(&self) -> Option<&FlowVector> {
        match &self.variant {
            Variant::Wffw(s) => Some(&s.smoothed),
            _ => None,
        }
    }

    pub fn ffw_choice(&self) -> Option<FfwChoice> {
        match &self.variant {
            Variant::Ffw(s) => s.last_choice,
            _ => None,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Performs iteration `k` and returns its record.
    pub fn step(&mut self) -> Result<ConvergenceRecord, SolveErrorKind> {
        let net = self.net;
        let k = self.k;
        let costs = edge_costs(net, &self.flow)?;
        let target = all_or_nothing(net, self.dm, &costs)?;
        let gap = clamped_fw_gap(numeric::dot(&costs, &self.flow), target.lp_value);
        let (lb, blb) = self.bounds.observe(self.psi, gap);

        let input = StepInput {
            net,
            k,
            flow: &self.flow,
            costs: &costs,
            target: &target.flow,
        };
        let proposal = self.variant.propose(&input)?;
        let direction = proposal.direction;

        let gamma = match (self.config.algorithm, self.config.step_policy) {
            (Algorithm::Fw, StepPolicy::Harmonic) => StepPolicy::harmonic_step(k),
            _ => line_search(net, &self.flow, &direction, &self.config.line_search)?.gamma,
        };
        let mut next = self.flow.step(gamma, &direction);
        let floor = NEGATIVE_FLOW_TOLERANCE * numeric::max_abs(&self.flow);
        for x in next.iter_mut() {
            if *x < 0.0 && *x >= -floor {
                *x = 0.0;
            }
        }
        let reset = self.variant.commit(&input, direction.clone(), gamma) || proposal.fallback;

        let psi_next = potential(net, &next)?;
        let record = ConvergenceRecord {
            k,
            elapsed: self.elapsed(),
            psi: psi_next,
            fw_gap: gap,
            lb,
            blb,
            rgap: relative_gap(psi_next, blb),
            gamma,
            reset,
        };
        self.flow = next;
        self.psi = psi_next;
        self.last_direction = Some(direction);
        self.k += 1;
        Ok(record)
    }

    fn converged(&self, record: &ConvergenceRecord) -> bool {
        let tol = self.config.rgap_tol;
        if !tol.is_finite() {
            return false;
        }
        match record.rgap {
            Some(rg) => rg <= tol,
            None => record.fw_gap <= tol * record.psi.abs(),
        }
    }

    /// Runs until the relative gap, iteration or time limit is hit.
    pub fn run(
        mut self,
        sink: &mut dyn FnMut(&ConvergenceRecord),
    ) -> Result<AlgorithmResult, SolveError> {
        let mut trace = Vec::new();
        if self.dm.by_origin().is_empty() {
            return Ok(AlgorithmResult {
                flow: self.flow,
                termination: Termination::RgapTol,
                trace,
                final_rgap: Some(0.0),
            });
        }
        let termination = loop {
            if self.k >= self.config.max_iter {
                break Termination::MaxIter;
            }
            if let Some(budget) = self.config.time_budget {
                if self.started.elapsed() > budget {
                    break Termination::TimeBudget;
                }
            }
            match self.step() {
                Ok(record) => {
                    sink(&record);
                    trace.push(record);
                    if self.converged(&record) {
                        break Termination::RgapTol;
                    }
                }
                Err(kind) => return Err(SolveError { kind, trace }),
            }
        };
        let final_rgap = trace.last().and_then(|r: &ConvergenceRecord| r.rgap);
        Ok(AlgorithmResult {
            flow: self.flow,
            termination,
            trace,
            final_rgap,
        })
    }
}

/// Initializes and runs the configured algorithm, reporting each record to `sink`.
pub fn solve(
    net: &Network,
    dm: &DemandMatrix,
    config: &SolverConfig,
    sink: &mut dyn FnMut(&ConvergenceRecord),
) -> Result<AlgorithmResult, SolveError> {
    let solver = Solver::new(net, dm, config.clone()).map_err(|kind| SolveError {
        kind,
        trace: Vec::new(),
    })?;
    solver.run(sink)
}

#[cfg(test)]
mod tests;
