use grl_core::agents::{Agent, EpsSchedule, Planning, ThompsonAgent};
use grl_core::envs::make_env;
use grl_core::multiagent::{nash_monitor, GameSpec, NashConfig};
use grl_core::{Action, BeliefState, DiscountSchedule, EnvSpec, RngStream};

use crate::Outcome;

const T: usize = 5000;
const SEEDS: u64 = 20;
const EPS: f64 = 0.1;
const DELTA: f64 = 5e-4;
const GAMMA: f64 = 0.01;
const PLANNING_EPS: f64 = 1e-4;
const GAP_DEPTH: usize = 4;
const CHECK_EVERY: usize = 50;

fn thompson(sched: &DiscountSchedule, rng: RngStream) -> Box<dyn Agent> {
    let class = [[0.5 + DELTA, 0.5 - DELTA], [0.5 - DELTA, 0.5 + DELTA]]
        .into_iter()
        .map(|p| make_env(&EnvSpec::Bernoulli { probs: p.to_vec() }, sched).unwrap())
        .collect();
    let planning = Planning::new(sched.clone())
        .with_eps(EpsSchedule::InvSqrtT)
        .with_planning_eps(PLANNING_EPS);
    Box::new(ThompsonAgent::new(BeliefState::uniform(class).unwrap(), planning, rng))
}

struct SeedResult {
    freq: [f64; 2],
    indicator: [f64; 2],
}

fn one_seed(seed: u64, sched: &DiscountSchedule) -> SeedResult {
    let env = GameSpec::MatchingPennies.build();
    let root = RngStream::from_seed(seed);
    let mut agents = vec![thompson(sched, root.split("agent/1")), thompson(sched, root.split("agent/2"))];
    let cfg = NashConfig {
        steps: T,
        eps: EPS,
        checkpoints: (1..=T / CHECK_EVERY).map(|k| k * CHECK_EVERY).collect(),
        gap_depth: GAP_DEPTH,
        sched: sched.clone(),
        depth_cap: 12,
    };
    let report = nash_monitor(&env, &mut agents, &cfg, &mut root.split("env")).unwrap();
    let from = 3 * T / 4 + 1;
    let freq = |i: usize| {
        let h = &report.trace.projections[i];
        (from..=T).filter(|&t| h.at(t).0 == Action(0)).count() as f64 / (T + 1 - from) as f64
    };
    SeedResult {
        freq: [freq(0), freq(1)],
        indicator: [report.indicator_fraction(0, from), report.indicator_fraction(1, from)],
    }
}

pub fn run() -> Outcome {
    let sched = DiscountSchedule::geometric(GAMMA).unwrap();
    let results: Vec<SeedResult> = (0..SEEDS).map(|s| one_seed(s, &sched)).collect();
    let freqs: Vec<f64> = results.iter().flat_map(|r| r.freq).collect();
    let fmin = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // The indicator fraction is a seed average, per agent.
    let mean_ind = |i: usize| results.iter().map(|r| r.indicator[i]).sum::<f64>() / SEEDS as f64;
    let ind = [mean_ind(0), mean_ind(1)];
    let worst_seed = results
        .iter()
        .flat_map(|r| r.indicator)
        .fold(f64::INFINITY, f64::min);
    let pass = fmin >= 0.4 && fmax <= 0.6 && ind.iter().all(|&f| f >= 0.9);
    Outcome::check(
        pass,
        format!(
            "{SEEDS} seeds, T={T}: last-quarter alpha frequencies in [{fmin:.3}, {fmax:.3}]; \
             seed-averaged eps-best-response fraction (eps={EPS}) agent 1 {:.3}, agent 2 {:.3} \
             (lowest single seed {worst_seed:.3})",
            ind[0],
            ind[1]
        ),
    )
}
