use std::collections::HashMap;
use std::sync::Arc;

use grl_core::envs::{percept_distribution, EnvRef};
use grl_core::planner::{optimal_value, policy_value};
use grl_core::prediction::{divergences, Iid, Laplace, MixturePredictor, Predictor, PredictorRef};
use grl_core::{Action, BeliefState, History, PerceptId, PlanQuery, Policy, RngStream};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use crate::common::{
    belief_at, random_class, random_schedule, sample_history, MixtureOracle, RandomPolicy,
};
use crate::Outcome;

const CASES: u32 = 128;

type Check = fn(u64) -> Result<(), TestCaseError>;

fn instance(seed: u64, halting: bool) -> (Vec<EnvRef>, Vec<f64>, RngStream) {
    let mut rng = RngStream::from_seed(seed).split("identity");
    let (members, prior) = random_class(&mut rng, halting);
    (members, prior, rng)
}

/// Σ_e ξ(e|h,a) w(ν|hae) = w(ν|h); the incremental posterior matches Bayes' rule from scratch.
fn martingale(seed: u64) -> Result<(), TestCaseError> {
    let (members, prior, mut rng) = instance(seed, false);
    let h = sample_history(&members[0], (rng.uniform() * 4.0) as usize, &mut rng);
    let b = belief_at(&members, &prior, &h);
    let batch = MixtureOracle::new(members.clone(), prior.clone()).posterior(&h);
    for (x, y) in b.posterior().iter().zip(&batch) {
        prop_assert!((x - y).abs() <= 1e-12, "incremental {x} vs batch {y}");
    }
    for a in [Action(0), Action(1)] {
        let xi = percept_distribution(&b.mixture_env(), &h, a).unwrap().probs;
        let mut expect = vec![0.0; members.len()];
        for (e, &p) in xi.iter().enumerate() {
            if p > 0.0 {
                let post = b.update_posterior(a, PerceptId(e)).unwrap();
                for (acc, w) in expect.iter_mut().zip(post.posterior()) {
                    *acc += p * w;
                }
            }
        }
        for (x, y) in expect.iter().zip(b.posterior()) {
            prop_assert!((x - y).abs() <= 1e-12, "E[w(hae)] = {x} vs w(h) = {y}");
        }
    }
    Ok(())
}

/// |V^{m'}(h) − V^{m}(h)| ≤ Γ_m/Γ_t for m ≤ m', for optimal and policy values.
fn truncation(seed: u64) -> Result<(), TestCaseError> {
    let (members, prior, mut rng) = instance(seed, seed.is_multiple_of(2));
    let sched = random_schedule(&mut rng);
    let h = sample_history(&members[0], (rng.uniform() * 2.0) as usize, &mut rng);
    let b = belief_at(&members, &prior, &h);
    let t = h.t();
    let m = t + (rng.uniform() * 4.0) as usize;
    let m2 = m + 1 + (rng.uniform() * 2.0) as usize;
    let pi = RandomPolicy(seed);
    let q = PlanQuery::for_belief(&b, m, &sched);
    let q2 = PlanQuery::for_belief(&b, m2, &sched);
    let bound = sched.tail_ratio(t, m) + 1e-12;
    let dv = (optimal_value(&q2).unwrap().value - optimal_value(&q).unwrap().value).abs();
    let dp = (policy_value(&q2, &pi).unwrap() - policy_value(&q, &pi).unwrap()).abs();
    prop_assert!(dv <= bound && dp <= bound, "dv={dv} dp={dp} bound={bound}");
    Ok(())
}

/// V^π_ξ(ε) = Σ_ν w(ν) V^π_ν(ε).
fn linearity(seed: u64) -> Result<(), TestCaseError> {
    let (members, prior, mut rng) = instance(seed, seed.is_multiple_of(3));
    let sched = random_schedule(&mut rng);
    let m = 2 + (rng.uniform() * 4.0) as usize;
    let pi = RandomPolicy(seed);
    let b = BeliefState::new(members.clone(), prior.clone()).unwrap();
    let lhs = policy_value(&PlanQuery::for_belief(&b, m, &sched), &pi).unwrap();
    let rhs: f64 = members
        .iter()
        .zip(&prior)
        .map(|(nu, w)| w * policy_value(&PlanQuery::new(nu, &History::new(), m, &sched), &pi).unwrap())
        .sum();
    prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
    Ok(())
}

/// V^π_ξ(h) = Σ_ν w(ν|h) V^π_ν(h) at a nonempty history.
fn mixture_value(seed: u64) -> Result<(), TestCaseError> {
    let (members, prior, mut rng) = instance(seed, seed.is_multiple_of(3));
    let sched = random_schedule(&mut rng);
    let h = sample_history(&members[0], 1 + (rng.uniform() * 3.0) as usize, &mut rng);
    let b = belief_at(&members, &prior, &h);
    let m = h.t() + 1 + (rng.uniform() * 3.0) as usize;
    let pi = RandomPolicy(seed);
    let lhs = policy_value(&PlanQuery::for_belief(&b, m, &sched), &pi).unwrap();
    let rhs: f64 = members
        .iter()
        .zip(b.posterior())
        .map(|(nu, w)| w * policy_value(&PlanQuery::new(nu, &h, m, &sched), &pi).unwrap())
        .sum();
    prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
    Ok(())
}

fn history_distribution(
    env: &EnvRef,
    h: &History,
    m: usize,
    pi: &dyn Policy,
) -> HashMap<History, f64> {
    let mut frontier = vec![(h.clone(), 1.0)];
    for _ in h.t()..m {
        let mut next = Vec::new();
        for (g, w) in frontier {
            let d = pi.action_distribution(&g).unwrap();
            for (a, &pa) in d.iter().enumerate() {
                let probs = percept_distribution(env, &g, Action(a)).unwrap().probs;
                for (e, p) in probs.into_iter().enumerate() {
                    if w * pa * p > 0.0 {
                        next.push((g.extended(Action(a), PerceptId(e)), w * pa * p));
                    }
                }
            }
        }
        frontier = next;
    }
    frontier.into_iter().collect()
}

/// |V^π_μ(h) − V^π_ν(h)| ≤ D(μ^π, ν^π | h) over histories up to m.
fn tv_bound(seed: u64) -> Result<(), TestCaseError> {
    let (members, _, mut rng) = instance(seed, false);
    if members.len() < 2 {
        return Ok(());
    }
    let sched = random_schedule(&mut rng);
    let h = sample_history(&members[0], (rng.uniform() * 2.0) as usize, &mut rng);
    let (mu, nu) = (&members[0], &members[1]);
    if percept_distribution(nu, &h.prefix(h.t()), Action(0)).is_err() {
        return Ok(());
    }
    let m = h.t() + 1 + (rng.uniform() * 3.0) as usize;
    let pi = RandomPolicy(seed);
    let gap = (policy_value(&PlanQuery::new(mu, &h, m, &sched), &pi).unwrap()
        - policy_value(&PlanQuery::new(nu, &h, m, &sched), &pi).unwrap())
    .abs();
    let p = history_distribution(mu, &h, m, &pi);
    let q = history_distribution(nu, &h, m, &pi);
    let mut tv = 0.0;
    for (k, v) in &p {
        tv += (v - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, v) in &q {
        if !p.contains_key(k) {
            tv += v;
        }
    }
    tv *= 0.5;
    prop_assert!(gap <= tv + 1e-12, "value gap {gap} > TV {tv}");
    Ok(())
}

fn random_predictor(rng: &mut RngStream) -> PredictorRef {
    match (rng.uniform() * 3.0) as usize {
        0 => Arc::new(Laplace::new(2).unwrap()),
        1 => Arc::new(Iid::bernoulli(0.05 + 0.9 * rng.uniform()).unwrap()),
        _ => Arc::new(MixturePredictor::bernoulli_grid(1 + (rng.uniform() * 9.0) as usize).unwrap()),
    }
}

/// TV ≤ √(KL/2) (nats); TV equals the largest event-probability difference.
fn pinsker(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = RngStream::from_seed(seed).split("pinsker");
    let p = random_predictor(&mut rng);
    let q = random_predictor(&mut rng);
    let x: Vec<usize> = (0..(rng.uniform() * 5.0) as usize)
        .map(|_| (rng.uniform() * 2.0) as usize)
        .collect();
    let d = 1 + (rng.uniform() * 6.0) as usize;
    let div = divergences(p.as_ref(), q.as_ref(), &x, d, 12).unwrap();
    prop_assert!(div.pinsker_holds(), "TV {} vs KL {}", div.tv, div.kl);
    if d <= 3 {
        let strings: Vec<Vec<usize>> = (0..1usize << d)
            .map(|c| (0..d).map(|i| (c >> i) & 1).collect())
            .collect();
        let cond = |pr: &dyn Predictor, s: &[usize]| {
            let full: Vec<usize> = x.iter().chain(s).copied().collect();
            pr.string_probability(&full).unwrap() / pr.string_probability(&x).unwrap()
        };
        let pp: Vec<f64> = strings.iter().map(|s| cond(p.as_ref(), s)).collect();
        let qq: Vec<f64> = strings.iter().map(|s| cond(q.as_ref(), s)).collect();
        let best = (0..1u32 << strings.len())
            .map(|set| {
                (0..strings.len())
                    .filter(|i| set >> i & 1 == 1)
                    .map(|i| pp[i] - qq[i])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        prop_assert!((best - div.tv).abs() <= 1e-12, "subset max {best} vs TV {}", div.tv);
    }
    Ok(())
}

/// Γ_t = γ_t + Γ_{t+1}, and H_t(ε) is the least k with Γ_{t+k}/Γ_t ≤ ε.
fn gamma_recursion(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = RngStream::from_seed(seed).split("gamma");
    let s = random_schedule(&mut rng);
    let t = 1 + (rng.uniform() * 200.0) as usize;
    let lhs = s.normalizer(t);
    let rhs = s.weight(t) + s.normalizer(t + 1);
    prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300), "Γ_t={lhs} vs {rhs}");
    let eps = 0.001 + 0.5 * rng.uniform();
    let h = s.effective_horizon(t, eps).unwrap();
    if !h.exhausted {
        let k = h.steps;
        prop_assert!(s.tail_ratio(t, t + k) <= eps + 1e-12);
        prop_assert!(k == 0 || s.tail_ratio(t, t + k - 1) > eps - 1e-12);
    }
    Ok(())
}

pub fn run() -> Outcome {
    let checks: [(&str, Check); 7] = [
        ("martingale", martingale),
        ("truncation", truncation),
        ("linearity", linearity),
        ("tv-bound", tv_bound),
        ("mixture-value", mixture_value),
        ("pinsker", pinsker),
        ("gamma-recursion", gamma_recursion),
    ];
    let mut failures = Vec::new();
    for (name, check) in checks {
        let mut runner = TestRunner::new(Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        });
        if let Err(e) = runner.run(&any::<u64>(), check) {
            failures.push(format!("{name}: {e}"));
        }
    }
    Outcome::check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("7 identities x {CASES} random instances hold")
        } else {
            failures.join("; ")
        },
    )
}
