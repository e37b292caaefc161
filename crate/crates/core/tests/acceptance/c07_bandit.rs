use std::collections::BTreeSet;

use grl_core::agents::{Agent, EpsSchedule, Planning, ThompsonAgent};
use grl_core::envs::{make_env, EnvRef};
use grl_core::{Action, BeliefState, DiscountSchedule, EnvSpec, EpisodeState, RngStream, StepOutcome};

use crate::Outcome;

const ARMS: usize = 10;
const SEEDS: u64 = 1000;
const GAMMA: f64 = 0.9;
const BANDIT_EPS: f64 = 0.1;
const PLANNING_EPS: f64 = 0.01;
const MAX_STEPS: usize = 10_000;

/// Distinct suboptimal arms pulled before the first pull of the optimal arm.
fn explored(class: &[EnvRef], sched: &DiscountSchedule, seed: u64) -> usize {
    let root = RngStream::from_seed(seed);
    let truth = root.split("truth").categorical(&[1.0; ARMS]);
    let optimal = Action(truth + 1);
    let planning = Planning::new(sched.clone())
        .with_eps(EpsSchedule::InvSqrtT)
        .with_planning_eps(PLANNING_EPS)
        .with_depth_cap(64);
    let belief = BeliefState::uniform(class.to_vec()).unwrap();
    let mut agent = ThompsonAgent::new(belief, planning, root.split("agent"));
    let mut env = EpisodeState::new(class[truth].clone());
    let mut env_rng = root.split("env");
    let mut wrong = BTreeSet::new();
    for _ in 0..MAX_STEPS {
        let a = agent.act().unwrap();
        if a == optimal {
            return wrong.len();
        }
        wrong.insert(a);
        match env.sample_step(a, &mut env_rng).unwrap() {
            StepOutcome::Percept(e) => agent.observe(a, e).unwrap(),
            StepOutcome::Halt => unreachable!("bandits are measures"),
        }
    }
    panic!("seed {seed}: optimal arm never pulled in {MAX_STEPS} steps");
}

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(GAMMA).unwrap();
    let class: Vec<EnvRef> = (1..=ARMS)
        .map(|index| {
            make_env(&EnvSpec::Bandit { arms: ARMS, index, epsilon: BANDIT_EPS }, &sched).unwrap()
        })
        .collect();
    let counts: Vec<usize> = (0..SEEDS).map(|s| explored(&class, &sched, s)).collect();
    let mean = counts.iter().sum::<usize>() as f64 / SEEDS as f64;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (SEEDS - 1) as f64;
    let pass = (mean - 5.0).abs() <= 1.0;
    Outcome::check(
        pass,
        format!(
            "n={ARMS}, {SEEDS} seeds: mean distinct suboptimal arms before the optimal arm = {mean:.3} \
             (sd of mean {:.3}; target 5 +- 1)",
            (var / SEEDS as f64).sqrt()
        ),
    )
}
