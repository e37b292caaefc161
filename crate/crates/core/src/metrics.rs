//! Regret, value gaps, intelligence, recoverability and best-response gaps.

use serde::Serialize;

use crate::discount::DiscountSchedule;
use crate::envs::{cursor_at, EnvRef, EpisodeState, StepOutcome};
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::mixture::BeliefState;
use crate::planner::{optimal_value, policy_value, PlanQuery};
use crate::policy::Policy;
use crate::rng::RngStream;
use crate::space::Action;

/// How E^π[Σ r] is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegretMode {
    Exact,
    Sampled { rollouts: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretLedger {
    pub m: usize,
    /// sup over policies of the expected undiscounted reward in steps 1..=m.
    pub best: f64,
    /// Expected (or sample-mean) undiscounted reward of π in steps 1..=m.
    pub policy: f64,
    pub regret: f64,
    /// 95% half-width of the sampled estimate.
    pub ci: Option<f64>,
}

/// R_m(π, μ) from the empty history.
pub fn regret(
    mu: &EnvRef,
    pi: &dyn Policy,
    m: usize,
    mode: RegretMode,
    depth_cap: usize,
) -> Result<RegretLedger> {
    let sched = DiscountSchedule::finite_horizon(m + 1)?;
    let q = PlanQuery::new(mu, &History::new(), m + 1, &sched)
        .undiscounted()
        .with_depth_cap(depth_cap);
    let best = optimal_value(&q)?.value;
    let (policy, ci) = match mode {
        RegretMode::Exact => (policy_value(&q, pi)?, None),
        RegretMode::Sampled { rollouts, seed } => {
            if rollouts == 0 {
                return Err(GrlError::InvalidArgument("need at least one rollout".into()));
            }
            let root = RngStream::from_seed(seed);
            let totals = (0..rollouts)
                .map(|i| rollout_reward(mu, pi, m, &mut root.split(&format!("rollout/{i}"))))
                .collect::<Result<Vec<_>>>()?;
            let n = totals.len() as f64;
            let mean = totals.iter().sum::<f64>() / n;
            let var = if totals.len() > 1 {
                totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (mean, Some(1.96 * (var / n).sqrt()))
        }
    };
    Ok(RegretLedger {
        m,
        best,
        policy,
        regret: best - policy,
        ci,
    })
}

fn rollout_reward(mu: &EnvRef, pi: &dyn Policy, m: usize, rng: &mut RngStream) -> Result<f64> {
    let mut ep = EpisodeState::new(mu.clone());
    for _ in 0..m {
        let a = Action(rng.categorical(&pi.action_distribution(ep.history())?));
        if ep.sample_step(a, rng)? == StepOutcome::Halt {
            break;
        }
    }
    Ok(ep.total_reward())
}

/// The agent side of a value gap.
pub enum AgentValue<'a> {
    /// V^π_μ(h) computed by the planner.
    Policy(&'a dyn Policy),
    /// Discounted rewards actually received along a trajectory extending h through step m−1.
    Realized(&'a History),
}

/// V^{*,m}_μ(h) − V^{π,m}_μ(h).
pub fn value_gap(
    mu: &EnvRef,
    h: &History,
    m: usize,
    sched: &DiscountSchedule,
    depth_cap: usize,
    agent: AgentValue<'_>,
) -> Result<f64> {
    let q = PlanQuery::new(mu, h, m, sched).with_depth_cap(depth_cap);
    let opt = optimal_value(&q)?.value;
    let mine = match agent {
        AgentValue::Policy(pi) => policy_value(&q, pi)?,
        AgentValue::Realized(traj) => realized_value(mu, traj, h.t(), m, sched)?,
    };
    Ok(opt - mine)
}

/// Σ_{k=t}^{m−1} γ_k r_k / Γ_t along `traj`.
pub fn realized_value(
    mu: &EnvRef,
    traj: &History,
    t: usize,
    m: usize,
    sched: &DiscountSchedule,
) -> Result<f64> {
    if traj.len() + 1 < m {
        return Err(GrlError::InvalidArgument(format!(
            "trajectory of length {} does not reach m={m}",
            traj.len()
        )));
    }
    let percepts = mu.percepts();
    Ok((t..m)
        .map(|k| sched.relative_weight(k, t) * percepts.reward(traj.at(k).1))
        .sum())
}

/// Υ_ξ(π) = Σ_ν w(ν) V^{π,m}_ν(ε) over the prior.
pub fn intelligence(
    b: &BeliefState,
    pi: &dyn Policy,
    m: usize,
    sched: &DiscountSchedule,
    depth_cap: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (env, w) in b.members().iter().zip(b.prior()) {
        let q = PlanQuery::new(env, &History::new(), m, sched).with_depth_cap(depth_cap);
        total += w * policy_value(&q, pi)?;
    }
    Ok(total)
}

/// Which policies the recoverability supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySet {
    /// All policies, by max/min search over histories of length t−1.
    Exact,
    /// Fixed action sequences only; gives a lower bound on the exact supremum.
    OpenLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverabilityReport {
    pub t: usize,
    pub m: usize,
    pub gap: f64,
    pub policy_set: PolicySet,
    pub lower_bound: bool,
}

struct Recover<'a> {
    mu: &'a EnvRef,
    t: usize,
    m: usize,
    sched: &'a DiscountSchedule,
    depth_cap: usize,
}

impl Recover<'_> {
    fn leaf(&self, h: &History) -> Result<ValueAndArgmax> {
        let q = PlanQuery::new(self.mu, h, self.m.max(h.t()), self.sched)
            .with_depth_cap(self.depth_cap);
        let r = optimal_value(&q)?;
        Ok(ValueAndArgmax {
            value: r.value,
            argmax: r.argmax,
        })
    }

    /// (E^{π*}, max_π, min_π) of V*(h_t) below `h`, weighted by path probability.
    fn search(&self, h: &mut History) -> Result<(f64, f64, f64)> {
        if h.t() == self.t {
            let v = self.leaf(h)?.value;
            return Ok((v, v, v));
        }
        let star = self.leaf(h)?.argmax;
        let cursor = cursor_at(self.mu, h);
        let n_e = self.mu.percepts().len();
        let mut probs = vec![0.0; n_e];
        let (mut best, mut worst, mut follow) = (f64::NEG_INFINITY, f64::INFINITY, 0.0);
        for a in self.mu.actions().iter() {
            cursor.fill(a, &mut probs)?;
            let (mut e_star, mut e_max, mut e_min) = (0.0, 0.0, 0.0);
            for (e, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                h.push(a, crate::space::PerceptId(e));
                let (s, hi, lo) = self.search(h)?;
                h.pop();
                e_star += p * s;
                e_max += p * hi;
                e_min += p * lo;
            }
            best = best.max(e_max);
            worst = worst.min(e_min);
            if a == star {
                follow = e_star;
            }
        }
        Ok((follow, best, worst))
    }

    fn open_loop(&self, h: &mut History, plan: &[Action]) -> Result<f64> {
        if h.t() == self.t {
            return Ok(self.leaf(h)?.value);
        }
        let a = plan[h.len()];
        let cursor = cursor_at(self.mu, h);
        let mut probs = vec![0.0; self.mu.percepts().len()];
        cursor.fill(a, &mut probs)?;
        let mut total = 0.0;
        for (e, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                h.push(a, crate::space::PerceptId(e));
                total += p * self.open_loop(h, plan)?;
                h.pop();
            }
        }
        Ok(total)
    }
}

struct ValueAndArgmax {
    value: f64,
    argmax: Action,
}

/// sup_π |E^{π*}[V*_μ(h_{<t})] − E^π[V*_μ(h_{<t})]| at horizon m.
pub fn recoverability_gap(
    mu: &EnvRef,
    t: usize,
    m: usize,
    sched: &DiscountSchedule,
    policy_set: PolicySet,
    depth_cap: usize,
) -> Result<RecoverabilityReport> {
    if t == 0 {
        return Err(GrlError::InvalidArgument("t starts at 1".into()));
    }
    if t - 1 > depth_cap {
        return Err(GrlError::EnumerationCap(format!(
            "recoverability prefix length {} exceeds the cap {depth_cap}",
            t - 1
        )));
    }
    let r = Recover {
        mu,
        t,
        m,
        sched,
        depth_cap,
    };
    let mut h = History::new();
    let (star, best, worst) = r.search(&mut h)?;
    let gap = match policy_set {
        PolicySet::Exact => (star - worst).max(best - star),
        PolicySet::OpenLoop => {
            let n = mu.actions().len();
            let len = t - 1;
            let count = n.checked_pow(len as u32).filter(|c| *c <= 1 << 20).ok_or_else(|| {
                GrlError::EnumerationCap(format!("{n}^{len} open-loop plans"))
            })?;
            let mut gap: f64 = 0.0;
            for code in 0..count {
                let mut c = code;
                let plan: Vec<Action> = (0..len)
                    .map(|_| {
                        let a = Action(c % n);
                        c /= n;
                        a
                    })
                    .collect();
                gap = gap.max((star - r.open_loop(&mut History::new(), &plan)?).abs());
            }
            gap
        }
    };
    Ok(RecoverabilityReport {
        t,
        m,
        gap,
        policy_set,
        lower_bound: policy_set == PolicySet::OpenLoop,
    })
}

/// V*_σ(h) − V^π_σ(h) in a subjective environment σ.
pub fn best_response_gap(
    sigma: &EnvRef,
    pi: &dyn Policy,
    h: &History,
    m: usize,
    sched: &DiscountSchedule,
    depth_cap: usize,
) -> Result<f64> {
    value_gap(sigma, h, m, sched, depth_cap, AgentValue::Policy(pi))
}
