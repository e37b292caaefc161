use grl_core::envs::make_env;
use grl_core::planner::{entropy_value, info_value};
use grl_core::{Action, BeliefState, DiscountSchedule, EnvSpec};

use crate::Outcome;

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(0.5).unwrap();
    let class = (1..=2)
        .map(|variant| make_env(&EnvSpec::KsaExample { variant }, &sched).unwrap())
        .collect();
    let b = BeliefState::uniform(class).unwrap();
    let ent = entropy_value(&b, 1, 12).unwrap();
    let ig = info_value(&b, 1, 12).unwrap();
    let pass = (ent.action_values[0] - 0.4322).abs() <= 1e-3
        && (ent.action_values[1] - 0.5).abs() <= 1e-9
        && ig.argmax == Action(0)
        && ig.action_values[0] > ig.action_values[1];
    Outcome::check(
        pass,
        format!(
            "V_Ent(alpha)={:.6} V_Ent(beta)={:.9}, V_IG(alpha)={:.6} V_IG(beta)={:.6}, IG argmax alpha: {}",
            ent.action_values[0],
            ent.action_values[1],
            ig.action_values[0],
            ig.action_values[1],
            ig.argmax == Action(0)
        ),
    )
}
