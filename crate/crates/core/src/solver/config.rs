use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::line_search::{LineSearchOptions, StepPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Plain Frank-Wolfe.
    Fw,
    /// Conjugate FW: one conjugate direction.
    Cfw,
    /// Fukushima FW: average of the last `l` targets.
    Ffw,
    /// Weighted Fukushima FW: exponentially smoothed targets.
    Wffw,
    /// N-conjugate FW. Bi-conjugate FW is `N = 2`.
    Nfw,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fw => "fw",
            Algorithm::Cfw => "cfw",
            Algorithm::Ffw => "ffw",
            Algorithm::Wffw => "wffw",
            Algorithm::Nfw => "nfw",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown algorithm {0:?} (expected fw, cfw, ffw, wffw, nfw or bfw)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fw" => Ok(Algorithm::Fw),
            "cfw" => Ok(Algorithm::Cfw),
            "ffw" => Ok(Algorithm::Ffw),
            "wffw" => Ok(Algorithm::Wffw),
            "nfw" | "bfw" => Ok(Algorithm::Nfw),
            _ => Err(UnknownAlgorithm(s.to_string())),
        }
    }
}

/// Which previous point enters the CFW coefficient denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CfwDenominator {
    /// `(x* - f^k)' H (s^k - f^{k-1})`.
    #[default]
    PreviousIterate,
    /// `(x* - f^k)' H (s^k - x*)`, which makes the new direction exactly
    /// conjugate to `x* - f^k`.
    PreviousTarget,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid solver configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Number of conjugate directions kept by NFW. Zero keeps none, which
    /// reduces NFW to plain FW.
    pub n_conjugate: usize,
    /// NFW drops its history after a step longer than this.
    pub gamma_max: f64,
    /// WFFW smoothing weight of the newest target.
    pub smoothing_weight: f64,
    /// FFW memory length.
    pub ffw_memory: usize,
    /// Upper end of the CFW coefficient projection.
    pub cfw_alpha_cap: f64,
    pub cfw_denominator: CfwDenominator,
    /// Only honored by FW; every other variant always uses the line search.
    pub step_policy: StepPolicy,
    pub max_iter: usize,
    pub time_budget: Option<Duration>,
    /// Stop once the relative gap drops to this value. A non-finite value
    /// disables the test.
    pub rgap_tol: f64,
    pub line_search: LineSearchOptions,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn nfw(n: usize) -> Self {
        Self {
            algorithm: Algorithm::Nfw,
            n_conjugate: n,
            ..Self::default()
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_time_budget(mut self, budget: Duration) -> Self {
        self.time_budget = Some(budget);
        self
    }

    pub fn with_rgap_tol(mut self, tol: f64) -> Self {
        self.rgap_tol = tol;
        self
    }

    /// Short human-readable label, e.g. `nfw(n=3)`.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Fw => match self.step_policy {
                StepPolicy::LineSearch => "fw".into(),
                StepPolicy::Harmonic => "fw(harmonic)".into(),
            },
            Algorithm::Cfw => "cfw".into(),
            Algorithm::Ffw => format!("ffw(l={})", self.ffw_memory),
            Algorithm::Wffw => format!("wffw(w={})", self.smoothing_weight),
            Algorithm::Nfw => format!("nfw(n={})", self.n_conjugate),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        match self.algorithm {
            Algorithm::Nfw if !(self.gamma_max > 0.0 && self.gamma_max < 1.0) => err(format!(
                "gamma_max must lie in (0, 1), got {}",
                self.gamma_max
            )),
            Algorithm::Wffw if !(self.smoothing_weight > 0.0 && self.smoothing_weight <= 1.0) => {
                err(format!(
                    "smoothing weight must lie in (0, 1], got {}",
                    self.smoothing_weight
                ))
            }
            Algorithm::Ffw if self.ffw_memory == 0 => err("FFW memory must be at least 1".into()),
            Algorithm::Cfw if !(self.cfw_alpha_cap > 0.0 && self.cfw_alpha_cap < 1.0) => {
                err(format!(
                    "cfw_alpha_cap must lie in (0, 1), got {}",
                    self.cfw_alpha_cap
                ))
            }
            _ if self.rgap_tol.is_nan() => err("rgap_tol is NaN".into()),
            _ if !(self.line_search.derivative_tol > 0.0 && self.line_search.bracket_tol > 0.0) => {
                err("line search tolerances must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Fw,
            n_conjugate: 3,
            gamma_max: 0.99,
            smoothing_weight: 0.15,
            ffw_memory: 3,
            cfw_alpha_cap: 0.99,
            cfw_denominator: CfwDenominator::default(),
            step_policy: StepPolicy::LineSearch,
            max_iter: 1000,
            time_budget: None,
            rgap_tol: 1e-6,
            line_search: LineSearchOptions::default(),
        }
    }
}
