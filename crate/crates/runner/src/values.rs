//! One-shot planner queries for `grl values`.

use std::fmt;

use grl_core::envs::make_env;
use grl_core::planner::{iterative_optimal_value, optimal_value};
use grl_core::{DiscountSchedule, EnvSpec, PlanQuery};
use serde::Serialize;

use crate::error::RunError;
use crate::literal::{format_history, parse_history};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuesReport {
    pub environment: String,
    pub history: String,
    pub t: usize,
    pub m: usize,
    pub iterative: bool,
    pub action_values: Vec<(String, f64)>,
    pub argmax: String,
    pub eps: f64,
    /// Actions within `eps` of the best value.
    pub eps_optimal: Vec<String>,
    pub truncation_bound: f64,
    /// H_t(eps) and whether m − t reaches it.
    pub effective_horizon: usize,
    pub certified: bool,
}

pub fn query(
    spec: &EnvSpec,
    sched: &DiscountSchedule,
    history: &str,
    m: usize,
    eps: f64,
    iterative: bool,
    cap: usize,
) -> Result<ValuesReport, RunError> {
    let env = make_env(spec, sched).map_err(|e| RunError::Config(e.to_string()))?;
    let h = parse_history(history, env.actions(), env.percepts())
        .map_err(|e| RunError::Config(e.to_string()))?;
    if m < h.t() {
        return Err(RunError::Config(format!("horizon m={m} is before t={}", h.t())));
    }
    if !(eps > 0.0) {
        return Err(RunError::Config(format!("eps must be positive, got {eps}")));
    }
    let q = PlanQuery::new(&env, &h, m, sched).with_depth_cap(cap);
    let r = if iterative {
        iterative_optimal_value(&q)?
    } else {
        optimal_value(&q)?
    };
    let name = |a| env.actions().name(a).to_string();
    let best = r.action_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let horizon = sched.effective_horizon(h.t(), eps)?;
    Ok(ValuesReport {
        environment: env.name().to_string(),
        history: format_history(&h, env.actions(), env.percepts()),
        t: h.t(),
        m,
        iterative,
        action_values: env.actions().iter().map(|a| (name(a), r.action_values[a.0])).collect(),
        argmax: name(r.argmax),
        eps,
        eps_optimal: env
            .actions()
            .iter()
            .filter(|a| r.action_values[a.0] >= best - eps)
            .map(name)
            .collect(),
        truncation_bound: r.truncation_bound,
        effective_horizon: horizon.steps,
        certified: horizon.exhausted || m - h.t() >= horizon.steps,
    })
}

impl fmt::Display for ValuesReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = if self.history.is_empty() { "ε" } else { &self.history };
        let mode = if self.iterative { "iterative" } else { "recursive" };
        writeln!(f, "environment: {}", self.environment)?;
        writeln!(f, "history: {h} (t = {}), horizon m = {}, {mode}", self.t, self.m)?;
        for (a, v) in &self.action_values {
            writeln!(f, "{a}: {v}")?;
        }
        writeln!(f, "argmax: {}", self.argmax)?;
        writeln!(f, "eps-optimal (eps = {}): {}", self.eps, self.eps_optimal.join(", "))?;
        writeln!(f, "truncation bound: {}", self.truncation_bound)?;
        write!(
            f,
            "effective horizon H_t(eps): {} ({})",
            self.effective_horizon,
            if self.certified { "m reaches it" } else { "m falls short" }
        )
    }
}
