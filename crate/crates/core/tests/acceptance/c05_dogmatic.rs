use std::sync::Arc;

use grl_core::envs::make_env;
use grl_core::mixture::dogmatic_prior;
use grl_core::planner::{eps_optimal_action, policy_value};
use grl_core::policy::ConstantPolicy;
use grl_core::{Action, BeliefState, DiscountSchedule, EnvSpec, PerceptId, PlanQuery};

use crate::Outcome;

const DEPTH: usize = 6;
const EPS: f64 = 0.125;
const PLANNING_EPS: f64 = 0.01;

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(0.5).unwrap();
    let class = [vec![0.9, 0.5], vec![0.6, 0.5]]
        .into_iter()
        .map(|probs| make_env(&EnvSpec::Bernoulli { probs }, &sched).unwrap())
        .collect();
    let b = BeliefState::uniform(class).unwrap();
    let pi = Arc::new(ConstantPolicy { action: Action(1), n: 2 });
    let xi = dogmatic_prior(&b, pi.clone(), EPS).unwrap();

    let h_eps = sched.effective_horizon(1, PLANNING_EPS / 2.0).unwrap().steps;
    let v_pi = policy_value(&PlanQuery::for_belief(&xi, 1 + h_eps, &sched), pi.as_ref()).unwrap();

    let mut frontier = vec![xi];
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    for _ in 0..=DEPTH {
        let mut next = Vec::new();
        for node in frontier {
            let choice = eps_optimal_action(PlanQuery::for_belief(&node, node.t(), &sched), PLANNING_EPS)
                .unwrap();
            checked += 1;
            let v = &choice.report.action_values;
            min_margin = min_margin.min(v[1] - v[0]);
            if choice.action != Action(1) {
                violations.push(format!("t={} chose {:?}", node.t(), choice.action));
            }
            if node.t() > DEPTH {
                continue;
            }
            for e in [PerceptId(0), PerceptId(1)] {
                if let Ok(child) = node.update_posterior(Action(1), e) {
                    next.push(child);
                }
            }
        }
        frontier = next;
    }
    let pass = violations.is_empty() && v_pi > EPS && min_margin > 0.0;
    Outcome::check(
        pass,
        format!(
            "V^pi_xi' = {v_pi:.4} > eps = {EPS}; {checked} on-policy histories to depth {DEPTH}, \
             pi's action chosen at all: {}; min V(beta) - V(alpha) = {min_margin:.4}",
            violations.is_empty()
        ),
    )
}
