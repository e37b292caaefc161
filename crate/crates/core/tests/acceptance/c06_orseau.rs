use grl_core::agents::{Agent, BayesAgent, EpsSchedule, Planning, ThompsonAgent};
use grl_core::envs::{make_env, orseau_position, EnvRef};
use grl_core::metrics::{value_gap, AgentValue};
use grl_core::{
    Action, BeliefState, DiscountSchedule, EnvSpec, EpisodeState, History, RngStream, StepOutcome,
};

use crate::Outcome;

const GAMMA: f64 = 0.9;
const T: usize = 2000;
const UNLOCKS: [usize; 4] = [10, 20, 40, 1500];
const PRIOR: [f64; 5] = [0.45, 0.15, 0.15, 0.15, 0.1];
const LOOKAHEAD: usize = 140;
const GAP_TOL: f64 = 1e-6;
const TS_SEEDS: u64 = 100;
const PLAN_CAP: usize = 200;

fn orseau(unlock: Option<usize>, sched: &DiscountSchedule) -> EnvRef {
    make_env(&EnvSpec::Orseau { unlock }, sched).unwrap()
}

fn class(sched: &DiscountSchedule) -> BeliefState {
    let mut members = vec![orseau(None, sched)];
    members.extend(UNLOCKS.iter().map(|&k| orseau(Some(k), sched)));
    BeliefState::new(members, PRIOR.to_vec()).unwrap()
}

fn planning(sched: &DiscountSchedule) -> Planning {
    Planning::new(sched.clone())
        .with_eps(EpsSchedule::InvSqrtT)
        .with_depth_cap(PLAN_CAP)
}

/// Runs `agent` in `env` for `steps` steps; returns the history.
fn simulate(agent: &mut dyn Agent, env: &EnvRef, steps: usize, seed: u64) -> History {
    let mut ep = EpisodeState::new(env.clone());
    let mut rng = RngStream::from_seed(seed).split("env");
    for _ in 0..steps {
        let a = agent.act().unwrap();
        match ep.sample_step(a, &mut rng).unwrap() {
            StepOutcome::Percept(e) => agent.observe(a, e).unwrap(),
            StepOutcome::Halt => unreachable!("Orseau environments are measures"),
        }
    }
    ep.history().clone()
}

/// Times at which α was taken in s₀ under environment `unlock`.
fn explorations(h: &History, unlock: Option<usize>, sched: &DiscountSchedule) -> Vec<usize> {
    (1..=h.len())
        .filter(|&t| h.at(t).0 == Action(0) && orseau_position(unlock, sched, &h.prefix(t)) == 0)
        .collect()
}

/// Whether the Thompson agent takes α in s₀ at some t ∈ [T/2, T] while living in ν_∞.
fn thompson_explores_late(sched: &DiscountSchedule, seed: u64) -> bool {
    let mut ts = ThompsonAgent::new(
        class(sched),
        planning(sched),
        RngStream::from_seed(seed).split("thompson"),
    );
    let h = simulate(&mut ts, &orseau(None, sched), T, seed);
    explorations(&h, None, sched).iter().any(|&t| t >= T / 2)
}

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(GAMMA).unwrap();
    let mut notes = Vec::new();

    // The Bayes agent in ν_∞: its last exploration step t₀.
    let mut bayes = BayesAgent::new(class(&sched), planning(&sched));
    let h_inf = simulate(&mut bayes, &orseau(None, &sched), T, 0);
    let explored = explorations(&h_inf, None, &sched);
    let Some(&t0) = explored.last() else {
        return Outcome::check(false, "the Bayes agent never explored in nu_inf");
    };
    notes.push(format!("Bayes explores in nu_inf at {explored:?}, t0 = {t0}"));

    // In ν_{t₀+1} the agent sees the same history and never explores again.
    let truth = orseau(Some(t0 + 1), &sched);
    let mut bayes = BayesAgent::new(class(&sched), planning(&sched));
    let traj = simulate(&mut bayes, &truth, T + LOOKAHEAD, 0);
    let same = traj.prefix(T + 1) == h_inf;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for t in t0 + 2..=T {
        let h = traj.prefix(t);
        if orseau_position(Some(t0 + 1), &sched, &h) != 0 {
            continue;
        }
        let gap = value_gap(&truth, &h, t + LOOKAHEAD, &sched, PLAN_CAP, AgentValue::Realized(&traj))
            .unwrap();
        worst = worst.max((gap - 0.5).abs());
        checked += 1;
    }
    let gap_ok = same && checked > 0 && worst <= GAP_TOL;
    notes.push(format!(
        "in nu_{}: history matches nu_inf run: {same}; gap at {checked} s0 times in [{}, {T}] has max |gap - 0.5| = {worst:.2e} (tol {GAP_TOL:e})",
        t0 + 1,
        t0 + 2
    ));

    let late = (0..TS_SEEDS).filter(|&s| thompson_explores_late(&sched, s)).count();
    let frac = late as f64 / TS_SEEDS as f64;
    let ts_ok = frac >= 0.9;
    notes.push(format!(
        "Thompson explores in [{}, {T}] in {late}/{TS_SEEDS} seeds (>= 90%: {ts_ok})",
        T / 2
    ));
    Outcome::check(gap_ok && ts_ok, notes.join("; "))
}
