//! Inline algorithm specs such as `nfw:n=3` or `wffw:w=0.15`.

use std::str::FromStr;

use crate::line_search::StepPolicy;
use crate::solver::{Algorithm, SolverConfig};

/// Hyperparameter overrides shared by every spec on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub gamma_max: Option<f64>,
    pub w: Option<f64>,
    pub l: Option<usize>,
    pub step: Option<StepPolicy>,
}

impl Overrides {
    pub fn apply(&self, config: &mut SolverConfig) {
        if let Some(n) = self.n {
            config.n_conjugate = n;
        }
        if let Some(g) = self.gamma_max {
            config.gamma_max = g;
        }
        if let Some(w) = self.w {
            config.smoothing_weight = w;
        }
        if let Some(l) = self.l {
            config.ffw_memory = l;
        }
        if let Some(s) = self.step {
            config.step_policy = s;
        }
    }
}

pub fn parse_step(s: &str) -> Result<StepPolicy, String> {
    match s {
        "linesearch" => Ok(StepPolicy::LineSearch),
        "harmonic" => Ok(StepPolicy::Harmonic),
        other => Err(format!(
            "unknown step policy {other:?} (expected linesearch or harmonic)"
        )),
    }
}

/// Config for an algorithm name. `bfw` is NFW with two conjugate directions.
pub fn base_config(name: &str) -> Result<SolverConfig, String> {
    let alg = Algorithm::from_str(name).map_err(|e| e.to_string())?;
    Ok(if name.eq_ignore_ascii_case("bfw") {
        SolverConfig::nfw(2)
    } else {
        SolverConfig::new(alg)
    })
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| format!("invalid value {v:?} for {key}: {e}"))
}

/// Parses `name[:key=value]...`. Inline values win over `shared`.
pub fn parse_spec(spec: &str, shared: &Overrides) -> Result<SolverConfig, String> {
    let mut parts = spec.trim().split(':');
    let name = parts.next().unwrap_or_default().trim();
    if name.is_empty() {
        return Err(format!("empty algorithm in {spec:?}"));
    }
    let mut config = base_config(name)?;
    shared.apply(&mut config);
    if name.eq_ignore_ascii_case("bfw") {
        config.n_conjugate = 2;
    }
    for kv in parts {
        let Some((key, v)) = kv.split_once('=') else {
            return Err(format!("expected key=value, found {kv:?} in {spec:?}"));
        };
        let key = key.trim();
        let v = v.trim();
        match key {
            "n" => config.n_conjugate = value(key, v)?,
            "gamma_max" | "gamma-max" => config.gamma_max = value(key, v)?,
            "w" => config.smoothing_weight = value(key, v)?,
            "l" => config.ffw_memory = value(key, v)?,
            "cap" => config.cfw_alpha_cap = value(key, v)?,
            "step" => config.step_policy = parse_step(v)?,
            _ => return Err(format!("unknown parameter {key:?} in {spec:?}")),
        }
    }
    config.validate().map_err(|e| format!("{spec}: {e}"))?;
    Ok(config)
}

/// Parses a comma-separated list of specs.
pub fn parse_spec_list(list: &str, shared: &Overrides) -> Result<Vec<SolverConfig>, String> {
    let specs: Vec<&str> = list.split(',').filter(|s| !s.trim().is_empty()).collect();
    if specs.is_empty() {
        return Err("--algs needs at least one algorithm".into());
    }
    specs.iter().map(|s| parse_spec(s, shared)).collect()
}
