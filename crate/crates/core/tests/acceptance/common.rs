//! Random instances and brute-force oracles shared by several criteria.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use grl_core::envs::{percept_distribution, EnvRef, FnEnvironment};
use grl_core::{
    Action, ActionSpace, BeliefState, DiscountSchedule, History, PerceptId, PerceptSpace, Policy,
    RngStream,
};

fn hash_unit(seed: u64, h: &History, a: Action, k: usize) -> f64 {
    let mut s = DefaultHasher::new();
    (seed, h.cycles(), a, k).hash(&mut s);
    (s.finish() >> 11) as f64 / (1u64 << 53) as f64
}

/// A history-dependent environment with pseudo-random conditionals.
/// With `halting`, part of the mass at each node is withheld.
pub fn random_env(seed: u64, percepts: &PerceptSpace, halting: bool) -> EnvRef {
    let n = percepts.len();
    FnEnvironment::new(
        format!("random_{seed}"),
        ActionSpace::numbered(2).unwrap(),
        percepts.clone(),
        move |h, a| {
            let mut w: Vec<f64> = (0..n)
                .map(|k| {
                    let u = hash_unit(seed, h, a, k);
                    if u < 0.15 { 0.0 } else { u }
                })
                .collect();
            if w.iter().all(|x| *x == 0.0) {
                w[0] = 1.0;
            }
            let mass = if halting {
                1.0 - 0.4 * hash_unit(seed, h, a, n)
            } else {
                1.0
            };
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s * mass).collect()
        },
    )
}

pub fn random_percepts(rng: &mut RngStream, n: usize) -> PerceptSpace {
    let labels: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    let pairs: Vec<(&str, f64)> = labels
        .iter()
        .map(|l| (l.as_str(), (rng.uniform() * 8.0).round() / 8.0))
        .collect();
    PerceptSpace::rewards(&pairs).unwrap()
}

pub fn random_schedule(rng: &mut RngStream) -> DiscountSchedule {
    match (rng.uniform() * 4.0) as usize {
        0 => DiscountSchedule::finite_horizon(3 + (rng.uniform() * 6.0) as usize).unwrap(),
        1 => DiscountSchedule::power(1.5 + rng.uniform()).unwrap(),
        _ => DiscountSchedule::geometric(0.2 + 0.79 * rng.uniform()).unwrap(),
    }
}

/// A stochastic history-dependent policy.
#[derive(Debug)]
pub struct RandomPolicy(pub u64);

impl Policy for RandomPolicy {
    fn num_actions(&self) -> usize {
        2
    }
    fn action_distribution(&self, h: &History) -> grl_core::Result<Vec<f64>> {
        let p = hash_unit(self.0, h, Action(9), 0);
        let p = if p < 0.2 { 0.0 } else if p > 0.8 { 1.0 } else { p };
        Ok(vec![p, 1.0 - p])
    }
}

/// The Bayes mixture evaluated from scratch: joint string probabilities per member,
/// conditionals as ratios of joints.
pub struct MixtureOracle {
    pub members: Vec<EnvRef>,
    pub prior: Vec<f64>,
    joints: HashMap<(usize, History), f64>,
}

impl MixtureOracle {
    pub fn new(members: Vec<EnvRef>, prior: Vec<f64>) -> Self {
        Self {
            members,
            prior,
            joints: HashMap::new(),
        }
    }

    /// ν_i(e_{1:n} ‖ a_{1:n}).
    fn member_joint(&mut self, i: usize, h: &History) -> f64 {
        if h.is_empty() {
            return 1.0;
        }
        if let Some(&v) = self.joints.get(&(i, h.clone())) {
            return v;
        }
        let prefix = h.prefix(h.len());
        let (a, e) = h.last().unwrap();
        let v = self.member_joint(i, &prefix)
            * percept_distribution(&self.members[i], &prefix, a).unwrap().probs[e.0];
        self.joints.insert((i, h.clone()), v);
        v
    }

    pub fn joint(&mut self, h: &History) -> f64 {
        (0..self.members.len())
            .map(|i| self.prior[i] * self.member_joint(i, h))
            .sum()
    }

    /// ξ(e | h, a) for every percept.
    pub fn conditional(&mut self, h: &History, a: Action) -> Vec<f64> {
        let base = self.joint(h);
        let n = self.members[0].percepts().len();
        (0..n)
            .map(|e| self.joint(&h.extended(a, PerceptId(e))) / base)
            .collect()
    }

    /// Posterior weights w(ν | h).
    pub fn posterior(&mut self, h: &History) -> Vec<f64> {
        let base = self.joint(h);
        (0..self.members.len())
            .map(|i| self.prior[i] * self.member_joint(i, h) / base)
            .collect()
    }

    fn reward(&self, e: usize) -> f64 {
        self.members[0].percepts().reward(PerceptId(e))
    }

    /// Unnormalized V*: max over actions of Σ_e ξ(e|h,a)(γ_t r_e + V*(hae)).
    pub fn optimal(&mut self, h: &History, m: usize, s: &DiscountSchedule) -> Vec<f64> {
        let t = h.t();
        let mut out = Vec::new();
        for a in 0..2 {
            let cond = self.conditional(h, Action(a));
            let mut q = 0.0;
            for (e, p) in cond.into_iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let next = h.extended(Action(a), PerceptId(e));
                let rest = if t + 1 < m {
                    self.optimal(&next, m, s).into_iter().fold(f64::MIN, f64::max)
                } else {
                    0.0
                };
                q += p * (s.weight(t) * self.reward(e) + rest);
            }
            out.push(q);
        }
        out
    }

    /// Unnormalized V^π as an explicit sum over every prefix h_{t:k} of
    /// γ_k r_k · Π π(a_j|·) ξ(e_j|·).
    pub fn policy(&mut self, h: &History, m: usize, s: &DiscountSchedule, pi: &dyn Policy) -> f64 {
        let mut frontier = vec![(h.clone(), 1.0)];
        let mut total = 0.0;
        for k in h.t()..m {
            let mut next = Vec::new();
            for (g, w) in frontier {
                let d = pi.action_distribution(&g).unwrap();
                for (a, &pa) in d.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    let cond = self.conditional(&g, Action(a));
                    for (e, p) in cond.into_iter().enumerate() {
                        let mass = w * pa * p;
                        if mass > 0.0 {
                            total += mass * s.weight(k) * self.reward(e);
                            next.push((g.extended(Action(a), PerceptId(e)), mass));
                        }
                    }
                }
            }
            frontier = next;
        }
        total
    }

    /// Unnormalized W*: rewards accrued along a path count only if it survives to m.
    pub fn iterative(&mut self, h: &History, m: usize, s: &DiscountSchedule, acc: f64) -> Vec<f64> {
        let t = h.t();
        let mut out = Vec::new();
        for a in 0..2 {
            let cond = self.conditional(h, Action(a));
            let mut q = 0.0;
            for (e, p) in cond.into_iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let r = acc + s.weight(t) * self.reward(e);
                let next = h.extended(Action(a), PerceptId(e));
                q += p * if t + 1 < m {
                    self.iterative(&next, m, s, r).into_iter().fold(f64::MIN, f64::max)
                } else {
                    r
                };
            }
            out.push(q);
        }
        out
    }
}

/// A random class with a random prior.
pub fn random_class(rng: &mut RngStream, halting: bool) -> (Vec<EnvRef>, Vec<f64>) {
    let n_e = 2 + (rng.uniform() * 2.0) as usize;
    let percepts = random_percepts(rng, n_e);
    let k = 1 + (rng.uniform() * 4.0) as usize;
    let members: Vec<EnvRef> = (0..k)
        .map(|_| random_env((rng.uniform() * 1e15) as u64, &percepts, halting))
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.uniform()).collect();
    let s: f64 = raw.iter().sum();
    let mut prior: Vec<f64> = raw.iter().map(|w| w / s).collect();
    let rest: f64 = prior[1..].iter().sum();
    prior[0] = 1.0 - rest;
    (members, prior)
}

/// A history of length `len` drawn from `env` under uniform actions (positive probability).
pub fn sample_history(env: &EnvRef, len: usize, rng: &mut RngStream) -> History {
    let mut h = History::new();
    for _ in 0..len {
        let a = Action(rng.categorical(&[1.0, 1.0]));
        let d = percept_distribution(env, &h, a).unwrap();
        if d.probs.iter().all(|p| *p == 0.0) {
            break;
        }
        h.push(a, PerceptId(rng.categorical(&d.probs)));
    }
    h
}

pub fn belief_at(members: &[EnvRef], prior: &[f64], h: &History) -> BeliefState {
    let mut b = BeliefState::new(members.to_vec(), prior.to_vec()).unwrap();
    for &(a, e) in h.cycles() {
        b.update(a, e).unwrap();
    }
    b
}


pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
