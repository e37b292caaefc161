use grl_core::envs::make_env;
use grl_core::metrics::{regret, RegretMode};
use grl_core::policy::ConstantPolicy;
use grl_core::{Action, DiscountSchedule, EnvSpec};

use crate::Outcome;

pub fn run() -> Outcome {
    let mu1 = make_env(
        &EnvSpec::HeavenHell { mirrored: false },
        &DiscountSchedule::geometric(0.5).unwrap(),
    )
    .unwrap();
    let alpha = ConstantPolicy { action: Action(0), n: 2 };
    let beta = ConstantPolicy { action: Action(1), n: 2 };
    let mut bad = Vec::new();
    for m in 1..=100 {
        let ra = regret(&mu1, &alpha, m, RegretMode::Exact, 100).unwrap().regret;
        let rb = regret(&mu1, &beta, m, RegretMode::Exact, 100).unwrap().regret;
        if ra != m as f64 || rb != 0.0 {
            bad.push(format!("m={m}: R(alpha)={ra}, R(beta)={rb}"));
        }
    }
    Outcome::check(
        bad.is_empty(),
        if bad.is_empty() {
            "R_m(first-alpha) = m and R_m(first-beta) = 0 exactly for m = 1..100".to_string()
        } else {
            bad.join("; ")
        },
    )
}
