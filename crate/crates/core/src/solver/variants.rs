//! Per-algorithm direction rules. Each variant proposes a direction from the
//! current iterate and FW target, then records the accepted step.

use std::collections::VecDeque;

use crate::cost::{hessian_diag, hessian_quadratic_form, CostError, CostVector, FlowVector};
use crate::network::Network;
use crate::numeric;

use super::config::{Algorithm, CfwDenominator, SolverConfig};
use super::nfw::{assemble_nfw_direction, compute_nfw_coefficients, Degenerate, HistoryEntry};

/// Denominators below this magnitude make CFW fall back to a plain FW step.
pub const CFW_MIN_DENOMINATOR: f64 = 1e-30;

pub(crate) struct StepInput<'a> {
    pub net: &'a Network,
    pub k: usize,
    pub flow: &'a FlowVector,
    pub costs: &'a CostVector,
    pub target: &'a FlowVector,
}

pub(crate) struct Proposal {
    pub direction: FlowVector,
    /// Degeneracy fallback taken while building the direction.
    pub fallback: bool,
}

impl Proposal {
    fn plain(direction: FlowVector) -> Self {
        Self {
            direction,
            fallback: false,
        }
    }
}

/// Which candidate the FFW test picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfwChoice {
    Mean,
    Latest,
}

pub(crate) struct CfwState {
    pub x_star: FlowVector,
    pub prev_flow: Option<FlowVector>,
    pub alpha_cap: f64,
    pub denominator: CfwDenominator,
    pub last_alpha: Option<f64>,
}

pub(crate) struct FfwState {
    pub memory: usize,
    pub targets: VecDeque<FlowVector>,
    pub last_choice: Option<FfwChoice>,
}

pub(crate) struct WffwState {
    pub weight: f64,
    pub smoothed: FlowVector,
}

pub(crate) struct NfwState {
    pub n: usize,
    pub gamma_max: f64,
    pub history: VecDeque<HistoryEntry>,
}

pub(crate) enum Variant {
    Fw,
    Cfw(CfwState),
    Ffw(FfwState),
    Wffw(WffwState),
    Nfw(NfwState),
}

impl Variant {
    pub fn new(config: &SolverConfig, f0: &FlowVector) -> Self {
        match config.algorithm {
            Algorithm::Fw => Variant::Fw,
            Algorithm::Cfw => Variant::Cfw(CfwState {
                x_star: f0.clone(),
                prev_flow: None,
                alpha_cap: config.cfw_alpha_cap,
                denominator: config.cfw_denominator,
                last_alpha: None,
            }),
            Algorithm::Ffw => Variant::Ffw(FfwState {
                memory: config.ffw_memory,
                targets: VecDeque::with_capacity(config.ffw_memory),
                last_choice: None,
            }),
            Algorithm::Wffw => Variant::Wffw(WffwState {
                weight: config.smoothing_weight,
                smoothed: f0.clone(),
            }),
            Algorithm::Nfw => Variant::Nfw(NfwState {
                n: config.n_conjugate,
                gamma_max: config.gamma_max,
                history: VecDeque::with_capacity(config.n_conjugate + 1),
            }),
        }
    }

    pub fn propose(&mut self, input: &StepInput<'_>) -> Result<Proposal, CostError> {
        let fw = || input.flow.towards(input.target);
        match self {
            Variant::Fw => Ok(Proposal::plain(fw())),
            Variant::Cfw(state) => state.propose(input),
            Variant::Ffw(state) => Ok(state.propose(input)),
            Variant::Wffw(state) => Ok(Proposal::plain(if input.k == 0 {
                fw()
            } else {
                state.smooth(input.target);
                input.flow.towards(&state.smoothed)
            })),
            Variant::Nfw(state) => state.propose(input),
        }
    }

    /// Records the accepted step. Returns true when the NFW history was reset.
    pub fn commit(&mut self, input: &StepInput<'_>, direction: FlowVector, gamma: f64) -> bool {
        match self {
            Variant::Cfw(state) => {
                state.prev_flow = Some(input.flow.clone());
                false
            }
            Variant::Nfw(state) => state.commit(direction, gamma),
            _ => false,
        }
    }

    pub fn n_curr(&self) -> Option<usize> {
        match self {
            Variant::Nfw(state) => Some(state.history.len()),
            _ => None,
        }
    }
}

/// Strictly negative slope of the potential along `d`.
fn is_descent(costs: &CostVector, d: &FlowVector) -> bool {
    numeric::dot(costs, d) < 0.0
}

impl CfwState {
    pub(crate) fn propose(&mut self, input: &StepInput<'_>) -> Result<Proposal, CostError> {
        let f = input.flow;
        let s = input.target;
        let Some(prev) = self.prev_flow.as_ref() else {
            // first iteration is a plain FW step
            return Ok(Proposal::plain(f.towards(s)));
        };
        let h = hessian_diag(input.net, f)?;
        let u = f.towards(&self.x_star);
        let d_fw = f.towards(s);
        let numerator = hessian_quadratic_form(&h, &u, &d_fw)?;
        let other = match self.denominator {
            CfwDenominator::PreviousIterate => prev.towards(s),
            CfwDenominator::PreviousTarget => self.x_star.towards(s),
        };
        let denominator = hessian_quadratic_form(&h, &u, &other)?;

        let (alpha, fallback) = if denominator.abs() < CFW_MIN_DENOMINATOR {
            (0.0, true)
        } else {
            let a = numerator / denominator;
            if a.is_finite() {
                (a.clamp(0.0, self.alpha_cap), false)
            } else {
                (0.0, true)
            }
        };
        let mut combined = self.x_star.clone();
        for (x, s) in combined.iter_mut().zip(s.iter()) {
            *x = alpha * *x + (1.0 - alpha) * s;
        }
        let direction = f.towards(&combined);
        if alpha > 0.0 && !is_descent(input.costs, &direction) && is_descent(input.costs, &d_fw) {
            // away from the quadratic regime the combination can point uphill
            self.last_alpha = Some(0.0);
            self.x_star = s.clone();
            return Ok(Proposal {
                direction: d_fw,
                fallback: true,
            });
        }
        self.last_alpha = Some(alpha);
        self.x_star = combined;
        Ok(Proposal {
            direction,
            fallback,
        })
    }
}

impl FfwState {
    pub(crate) fn propose(&mut self, input: &StepInput<'_>) -> Proposal {
        if self.targets.len() == self.memory {
            self.targets.pop_front();
        }
        self.targets.push_back(input.target.clone());

        // average over the newest q + 1 targets, q = min(k, l) - 1 floored at 0
        let terms = input.k.min(self.memory).max(1);
        let weight = 1.0 / terms as f64;
        let f = input.flow;
        let mut mean = FlowVector::zeros(f.len());
        for s in self.targets.iter().rev().take(terms) {
            for (m, x) in mean.iter_mut().zip(s.iter()) {
                *m += weight * x;
            }
        }
        let nu = f.towards(&mean);
        let w = f.towards(input.target);

        let norm_nu = numeric::norm(&nu);
        let norm_w = numeric::norm(&w);
        let choice = if norm_w == 0.0 || norm_nu == 0.0 {
            FfwChoice::Latest
        } else {
            let slope_nu = numeric::dot(input.costs, &nu) / norm_nu;
            let slope_w = numeric::dot(input.costs, &w) / norm_w;
            if slope_nu <= slope_w {
                FfwChoice::Mean
            } else {
                FfwChoice::Latest
            }
        };
        self.last_choice = Some(choice);
        Proposal::plain(match choice {
            FfwChoice::Mean => nu,
            FfwChoice::Latest => w,
        })
    }
}

impl WffwState {
    fn smooth(&mut self, target: &FlowVector) {
        let keep = 1.0 - self.weight;
        for (q, s) in self.smoothed.iter_mut().zip(target.iter()) {
            *q = keep * *q + self.weight * s;
        }
    }
}

impl NfwState {
    pub(crate) fn propose(&mut self, input: &StepInput<'_>) -> Result<Proposal, CostError> {
        let f = input.flow;
        let d_fw = f.towards(input.target);
        if self.history.is_empty() {
            return Ok(Proposal::plain(assemble_nfw_direction(
                &self.history,
                &[1.0],
                &d_fw,
            )));
        }
        let h = hessian_diag(input.net, f)?;
        let (alphas, fallback) = match self.convex_coefficients(&h, &d_fw) {
            Ok((alphas, dropped)) => {
                if dropped > 0 {
                    log::debug!(
                        "nfw: k={} dropped {dropped} old directions for a convex target",
                        input.k
                    );
                }
                (alphas, dropped > 0)
            }
            Err(reason) => {
                log::debug!("nfw: k={} degenerate history ({reason}), FW step", input.k);
                self.history.clear();
                (vec![1.0], true)
            }
        };
        let direction = assemble_nfw_direction(&self.history, &alphas, &d_fw);
        if !is_descent(input.costs, &direction) && is_descent(input.costs, &d_fw) {
            log::debug!(
                "nfw: k={} conjugate direction is not a descent direction, FW step",
                input.k
            );
            self.history.clear();
            return Ok(Proposal {
                direction: d_fw,
                fallback: true,
            });
        }
        Ok(Proposal {
            direction,
            fallback,
        })
    }

    /// Coefficients over the longest recent prefix of the history that gives
    /// a convex combination of targets. The history is cut to that prefix and
    /// the number of dropped directions is returned alongside.
    fn convex_coefficients(
        &mut self,
        h: &[f64],
        d_fw: &[f64],
    ) -> Result<(Vec<f64>, usize), Degenerate> {
        let full = self.history.len();
        for m in (1..=full).rev() {
            let alphas = compute_nfw_coefficients(self.history.iter().take(m), h, d_fw)?;
            if alphas.iter().all(|a| *a >= 0.0) {
                self.history.truncate(m);
                return Ok((alphas, full - m));
            }
        }
        self.history.clear();
        Ok((vec![1.0], full))
    }

    pub(crate) fn commit(&mut self, direction: FlowVector, gamma: f64) -> bool {
        self.history.push_front(HistoryEntry { direction, gamma });
        if gamma > self.gamma_max {
            self.history.truncate(self.n.min(1));
            true
        } else {
            self.history.truncate(self.n);
            false
        }
    }
}
