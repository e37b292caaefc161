use grl_core::planner::{iterative_optimal_value, optimal_value, policy_value};
use grl_core::policy::FnPolicy;
use grl_core::{History, PlanQuery, Policy, RngStream};

use crate::common::{
    belief_at, max_abs_diff, random_class, random_schedule, sample_history, MixtureOracle,
    RandomPolicy,
};
use crate::Outcome;

const INSTANCES: u64 = 120;
const TOL: f64 = 1e-9;

/// Every deterministic policy on histories of length ≤ 2 beyond `h`, as closures.
fn small_policies(h: &History, n_e: usize) -> Vec<FnPolicy<impl Fn(&History) -> Vec<f64> + Send + Sync>> {
    let root = h.len();
    let bits = 1 + 2 * n_e;
    (0..1u32 << bits)
        .map(move |code| {
            FnPolicy {
                n: 2,
                f: move |g: &History| {
                let depth = g.len() - root;
                let slot = match depth {
                    0 => 0,
                    _ => {
                        let (a, e) = g.cycles()[root];
                        1 + a.0 * n_e + e.0
                    }
                };
                let a = (code >> slot) as usize & 1;
                if a == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }
                },
            }
        })
        .collect()
}

pub fn run() -> Outcome {
    let mut rng = RngStream::from_seed(20_240_101).split("criterion-1");
    let mut worst: f64 = 0.0;
    let mut enumerated = 0;
    let mut checks = 0;
    for inst in 0..INSTANCES {
        let halting = inst % 3 == 0;
        let (members, prior) = random_class(&mut rng, halting);
        let sched = random_schedule(&mut rng);
        let h = sample_history(&members[0], (rng.uniform() * 3.0) as usize, &mut rng);
        let t = h.t();
        let m = t + 1 + (rng.uniform() * 5.0) as usize;
        let b = belief_at(&members, &prior, &h);
        let q = PlanQuery::for_belief(&b, m, &sched);
        let norm = sched.normalizer(t);
        let mut oracle = MixtureOracle::new(members.clone(), prior.clone());

        let got = optimal_value(&q).unwrap();
        let want: Vec<f64> = oracle.optimal(&h, m, &sched).iter().map(|v| v / norm).collect();
        worst = worst.max(max_abs_diff(&got.action_values, &want));

        let pi = RandomPolicy(inst);
        let got_pi = policy_value(&q, &pi).unwrap();
        worst = worst.max((got_pi - oracle.policy(&h, m, &sched, &pi) / norm).abs());

        let got_w = iterative_optimal_value(&q).unwrap();
        let want_w: Vec<f64> =
            oracle.iterative(&h, m, &sched, 0.0).iter().map(|v| v / norm).collect();
        worst = worst.max(max_abs_diff(&got_w.action_values, &want_w));
        checks += 3;

        if m - t <= 2 {
            let n_e = members[0].percepts().len();
            let best = small_policies(&h, n_e)
                .iter()
                .map(|p| oracle.policy(&h, m, &sched, p as &dyn Policy) / norm)
                .fold(f64::MIN, f64::max);
            worst = worst.max((best - got.value).abs());
            enumerated += 1;
            checks += 1;
        }
    }
    Outcome::check(
        worst <= TOL,
        format!(
            "{INSTANCES} instances, {checks} comparisons ({enumerated} by policy enumeration), max |diff| = {worst:.2e} (tol {TOL:e})"
        ),
    )
}
