use grl_core::envs::make_env;
use grl_core::planner::{iterative_optimal_value, optimal_value};
use grl_core::{Action, DiscountSchedule, EnvSpec, History, PlanQuery};

use crate::Outcome;

const TOL: f64 = 1e-9;

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(0.5).unwrap();
    let env = make_env(&EnvSpec::Separator { epsilon: 0.1 }, &sched).unwrap();
    let q = PlanQuery::new(&env, &History::new(), 6, &sched);
    let v = optimal_value(&q).unwrap();
    let w = iterative_optimal_value(&q).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= TOL;
    let pass = close(v.action_values[0], 0.5)
        && close(v.action_values[1], 0.05)
        && v.argmax == Action(0)
        && close(w.action_values[0], 0.0)
        && close(w.action_values[1], 0.05)
        && w.argmax == Action(1);
    Outcome::check(
        pass,
        format!(
            "recursive alpha={:.12} beta={:.12} argmax={}, iterative alpha={:.12} beta={:.12} argmax={}",
            v.action_values[0],
            v.action_values[1],
            env.actions().name(v.argmax),
            w.action_values[0],
            w.action_values[1],
            env.actions().name(w.argmax)
        ),
    )
}
