//! Exact finite-horizon expectimax.
//!
//! Reward values sum γ_k·r_k over k = t..m−1 and are normalized by Γ_t.
//! Knowledge-seeking values count percepts t..m inclusive and are not discounted.

use std::collections::HashMap;

use serde::Serialize;

use crate::discount::DiscountSchedule;
use crate::envs::{check_distribution, cursor_at, Cursor, EnvRef, StateKey};
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::mixture::{BeliefState, MixtureCursor};
use crate::policy::Policy;
use crate::space::{Action, ActionSpace, PerceptId, PerceptSpace};

pub const DEFAULT_DEPTH_CAP: usize = 12;
/// Actions whose values are within this of the maximum count as tied.
pub const TIE_TOL: f64 = 1e-9;
pub const DEPTH_CAP_ENV: &str = "GRL_DEPTH_CAP";

/// The default depth cap, overridable through `GRL_DEPTH_CAP`.
pub fn default_depth_cap() -> usize {
    std::env::var(DEPTH_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DEPTH_CAP)
}

/// A planning problem: an environment positioned at a history, a horizon and a discount.
pub struct PlanQuery {
    cursor: Box<dyn Cursor>,
    history: History,
    env_name: String,
    rewards: Vec<f64>,
    n_actions: usize,
    m: usize,
    sched: DiscountSchedule,
    depth_cap: usize,
    undiscounted: bool,
    memo: bool,
}

impl Clone for PlanQuery {
    fn clone(&self) -> Self {
        Self {
            cursor: self.cursor.fork(),
            history: self.history.clone(),
            env_name: self.env_name.clone(),
            rewards: self.rewards.clone(),
            n_actions: self.n_actions,
            m: self.m,
            sched: self.sched.clone(),
            depth_cap: self.depth_cap,
            undiscounted: self.undiscounted,
            memo: self.memo,
        }
    }
}

impl PlanQuery {
    pub fn new(env: &EnvRef, h: &History, m: usize, sched: &DiscountSchedule) -> Self {
        Self::for_cursor(
            cursor_at(env, h),
            h.clone(),
            env.actions(),
            env.percepts(),
            env.name(),
            m,
            sched,
        )
    }

    /// `cursor` must be positioned at `history`.
    pub fn for_cursor(
        cursor: Box<dyn Cursor>,
        history: History,
        actions: &ActionSpace,
        percepts: &PerceptSpace,
        name: &str,
        m: usize,
        sched: &DiscountSchedule,
    ) -> Self {
        Self {
            cursor,
            history,
            env_name: name.to_string(),
            rewards: percepts.iter().map(|e| percepts.reward(e)).collect(),
            n_actions: actions.len(),
            m,
            sched: sched.clone(),
            depth_cap: default_depth_cap(),
            undiscounted: false,
            memo: true,
        }
    }

    /// The posterior mixture at the belief's current history.
    pub fn for_belief(b: &BeliefState, m: usize, sched: &DiscountSchedule) -> Self {
        Self::for_cursor(
            Box::new(b.mixture_cursor()),
            b.history().clone(),
            b.actions(),
            b.percepts(),
            "xi",
            m,
            sched,
        )
    }

    pub fn with_horizon(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    /// Every step weighs 1 and values are not normalized (expected reward sums).
    pub fn undiscounted(mut self) -> Self {
        self.undiscounted = true;
        self
    }

    /// Disables memoization (results are identical; used to check that).
    pub fn without_memo(mut self) -> Self {
        self.memo = false;
        self
    }

    pub fn t(&self) -> usize {
        self.history.t()
    }

    pub fn horizon(&self) -> usize {
        self.m
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn schedule(&self) -> &DiscountSchedule {
        &self.sched
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    /// Γ_t = 0: every value is 0.
    fn exhausted(&self) -> bool {
        !self.undiscounted && self.sched.exhausted(self.t())
    }

    fn truncation_bound(&self) -> f64 {
        if self.undiscounted {
            0.0
        } else {
            self.sched.tail_ratio(self.t(), self.m.max(self.t()))
        }
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if self.m < self.t() {
            return Err(GrlError::InvalidArgument(format!(
                "horizon m={} precedes t={}",
                self.m,
                self.t()
            )));
        }
        if depth > self.depth_cap {
            let t = self.t();
            let achievable = (!self.undiscounted && !self.exhausted())
                .then(|| self.sched.tail_ratio(t, t + self.depth_cap));
            return Err(GrlError::PlanTooDeep {
                depth,
                cap: self.depth_cap,
                achievable_eps: achievable,
            });
        }
        Ok(())
    }

    fn search(&self) -> Search<'_> {
        Search {
            q: self,
            memo: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub value: f64,
    pub argmax: Action,
    pub action_values: Vec<f64>,
    /// Γ_m/Γ_t: how far the m-truncated value can be from the untruncated one.
    pub truncation_bound: f64,
    pub t: usize,
    pub m: usize,
}

/// The first action (in ≻ order) whose value is within `slack` (at least the tie tolerance) of the max.
pub fn select_action(values: &[f64], slack: f64) -> Action {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = slack.max(TIE_TOL);
    Action(
        values
            .iter()
            .position(|&v| v >= best - slack)
            .unwrap_or(0),
    )
}

fn report(values: Vec<f64>, q: &PlanQuery) -> ValueReport {
    let argmax = select_action(&values, 0.0);
    ValueReport {
        value: values[argmax.0],
        argmax,
        action_values: values,
        truncation_bound: q.truncation_bound(),
        t: q.t(),
        m: q.m,
    }
}

struct Search<'a> {
    q: &'a PlanQuery,
    memo: HashMap<(usize, StateKey), f64>,
}

impl Search<'_> {
    fn weight(&self, t: usize) -> f64 {
        if self.q.undiscounted {
            1.0
        } else {
            self.q.sched.relative_weight(t, self.q.t())
        }
    }

    fn probs(&self, c: &dyn Cursor, a: Action) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.q.rewards.len()];
        c.fill(a, &mut p)?;
        check_distribution(&self.q.env_name, &p)?;
        Ok(p)
    }

    fn memo_key(&self, c: &dyn Cursor) -> Option<StateKey> {
        if self.q.memo {
            c.key()
        } else {
            None
        }
    }

    /// Optimal value Σ_{k=t}^{m−1} w_k r_k under expectimax, with w_k = γ_k/Γ_t (1 if undiscounted).
    fn optimal(&mut self, c: &dyn Cursor) -> Result<f64> {
        let t = c.t();
        if t >= self.q.m {
            return Ok(0.0);
        }
        let key = self.memo_key(c);
        if let Some(k) = &key {
            if let Some(v) = self.memo.get(&(t, k.clone())) {
                return Ok(*v);
            }
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.q.n_actions {
            let v = self.optimal_q(c, Action(a))?;
            if v > best {
                best = v;
            }
        }
        if let Some(k) = key {
            self.memo.insert((t, k), best);
        }
        Ok(best)
    }

    fn optimal_q(&mut self, c: &dyn Cursor, a: Action) -> Result<f64> {
        let t = c.t();
        let p = self.probs(c, a)?;
        let w = self.weight(t);
        let last = t + 1 >= self.q.m;
        let mut total = 0.0;
        for (e, &pe) in p.iter().enumerate() {
            if pe <= 0.0 {
                continue;
            }
            let mut future = 0.0;
            if !last {
                let mut next = c.fork();
                next.advance(a, PerceptId(e));
                future = self.optimal(next.as_ref())?;
            }
            total += pe * (w * self.q.rewards[e] + future);
        }
        Ok(total)
    }

    fn policy(&mut self, c: &dyn Cursor, h: &mut History, pi: &dyn Policy) -> Result<f64> {
        let t = c.t();
        if t >= self.q.m {
            return Ok(0.0);
        }
        let key = match (self.memo_key(c), pi.memo_key(h)) {
            (Some(mut k), Some(pk)) => {
                k.push(u64::MAX);
                k.extend(pk);
                Some(k)
            }
            _ => None,
        };
        if let Some(k) = &key {
            if let Some(v) = self.memo.get(&(t, k.clone())) {
                return Ok(*v);
            }
        }
        let dist = checked_policy(pi, h, self.q.n_actions)?;
        let w = self.weight(t);
        let mut total = 0.0;
        for (a, &pa) in dist.iter().enumerate() {
            if pa <= 0.0 {
                continue;
            }
            let a = Action(a);
            let p = self.probs(c, a)?;
            for (e, &pe) in p.iter().enumerate() {
                if pe <= 0.0 {
                    continue;
                }
                let mut future = 0.0;
                if t + 1 < self.q.m {
                    let mut next = c.fork();
                    next.advance(a, PerceptId(e));
                    h.push(a, PerceptId(e));
                    let r = self.policy(next.as_ref(), h, pi);
                    h.pop();
                    future = r?;
                }
                total += pa * pe * (w * self.q.rewards[e] + future);
            }
        }
        if let Some(k) = key {
            self.memo.insert((t, k), total);
        }
        Ok(total)
    }

    /// Whole-sequence accounting: the accrued sum only counts on paths that survive to m.
    fn iterative(&mut self, c: &dyn Cursor, accrued: f64) -> Result<f64> {
        if c.t() >= self.q.m {
            return Ok(accrued);
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.q.n_actions {
            let v = self.iterative_q(c, Action(a), accrued)?;
            if v > best {
                best = v;
            }
        }
        Ok(best)
    }

    fn iterative_q(&mut self, c: &dyn Cursor, a: Action, accrued: f64) -> Result<f64> {
        let t = c.t();
        let p = self.probs(c, a)?;
        let w = self.weight(t);
        let mut total = 0.0;
        for (e, &pe) in p.iter().enumerate() {
            if pe <= 0.0 {
                continue;
            }
            let mut next = c.fork();
            next.advance(a, PerceptId(e));
            total += pe * self.iterative(next.as_ref(), accrued + w * self.q.rewards[e])?;
        }
        Ok(total)
    }
}

fn checked_policy(pi: &dyn Policy, h: &History, n: usize) -> Result<Vec<f64>> {
    let d = pi.action_distribution(h)?;
    let s: f64 = d.iter().sum();
    if d.len() != n || d.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(GrlError::InvalidArgument(format!(
            "policy returned an invalid action distribution {d:?}"
        )));
    }
    Ok(d)
}

/// V^{*,m}(h) with per-action values.
pub fn optimal_value(q: &PlanQuery) -> Result<ValueReport> {
    q.check_depth(q.m.saturating_sub(q.t()))?;
    if q.exhausted() || q.m == q.t() {
        return Ok(report(vec![0.0; q.n_actions], q));
    }
    let mut s = q.search();
    let mut values = Vec::with_capacity(q.n_actions);
    for a in 0..q.n_actions {
        values.push(s.optimal_q(q.cursor.as_ref(), Action(a))?);
    }
    Ok(report(values, q))
}

/// V^{π,m}(h).
pub fn policy_value(q: &PlanQuery, pi: &dyn Policy) -> Result<f64> {
    q.check_depth(q.m.saturating_sub(q.t()))?;
    if q.exhausted() || q.m == q.t() {
        return Ok(0.0);
    }
    let mut h = q.history.clone();
    q.search().policy(q.cursor.as_ref(), &mut h, pi)
}

/// W^{*,m}(h): rewards only count on paths where the environment survives to m.
pub fn iterative_optimal_value(q: &PlanQuery) -> Result<ValueReport> {
    q.check_depth(q.m.saturating_sub(q.t()))?;
    if q.exhausted() || q.m == q.t() {
        return Ok(report(vec![0.0; q.n_actions], q));
    }
    let mut s = q.search();
    let mut values = Vec::with_capacity(q.n_actions);
    for a in 0..q.n_actions {
        values.push(s.iterative_q(q.cursor.as_ref(), Action(a), 0.0)?);
    }
    Ok(report(values, q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsChoice {
    pub action: Action,
    pub report: ValueReport,
    /// Set when Γ_t = 0 and every action is trivially optimal.
    pub exhausted: bool,
}

/// Plans to m = t + H_t(ε/2) and returns the first action (in ≻ order) within ε/2 of the best.
/// The horizon already set on `q` is ignored.
pub fn eps_optimal_action(q: PlanQuery, eps: f64) -> Result<EpsChoice> {
    if !(eps > 0.0) {
        return Err(GrlError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let t = q.t();
    let h = q.sched.effective_horizon(t, (eps / 2.0).min(1.0))?;
    if h.exhausted {
        let q = q.with_horizon(t);
        return Ok(EpsChoice {
            action: Action(0),
            report: report(vec![0.0; q.n_actions], &q),
            exhausted: true,
        });
    }
    if h.steps > q.depth_cap {
        return Err(GrlError::PlanTooDeep {
            depth: h.steps,
            cap: q.depth_cap,
            achievable_eps: Some(2.0 * q.sched.tail_ratio(t, t + q.depth_cap)),
        });
    }
    let q = q.with_horizon(t + h.steps);
    let r = optimal_value(&q)?;
    Ok(EpsChoice {
        action: select_action(&r.action_values, eps / 2.0),
        report: r,
        exhausted: false,
    })
}

/// Which knowledge-seeking payoff to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KsPayoff {
    /// −log₂ ξ(e) per percept.
    Entropy,
    /// Drop in posterior entropy per percept.
    Information,
}

struct KsSearch {
    payoff: KsPayoff,
    m: usize,
    n_actions: usize,
    n_percepts: usize,
    memo: HashMap<(usize, StateKey), f64>,
}

impl KsSearch {
    fn value(&mut self, c: &MixtureCursor) -> Result<f64> {
        let t = c.t();
        if t > self.m {
            return Ok(0.0);
        }
        let key = c.key();
        if let Some(k) = &key {
            if let Some(v) = self.memo.get(&(t, k.clone())) {
                return Ok(*v);
            }
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.n_actions {
            let v = self.q(c, Action(a))?;
            if v > best {
                best = v;
            }
        }
        if let Some(k) = key {
            self.memo.insert((t, k), best);
        }
        Ok(best)
    }

    fn q(&mut self, c: &MixtureCursor, a: Action) -> Result<f64> {
        let mut p = vec![0.0; self.n_percepts];
        c.fill(a, &mut p)?;
        check_distribution("xi", &p)?;
        let h0 = c.entropy();
        let mut total = 0.0;
        for (e, &pe) in p.iter().enumerate() {
            if pe <= 0.0 {
                continue;
            }
            let mut next = c.fork_mixture();
            next.advance(a, PerceptId(e));
            let gain = match self.payoff {
                KsPayoff::Entropy => -pe.log2(),
                KsPayoff::Information => h0 - next.entropy(),
            };
            let future = if c.t() < self.m {
                self.value(&next)?
            } else {
                0.0
            };
            total += pe * (gain + future);
        }
        Ok(total)
    }
}

fn ks_value(b: &BeliefState, m: usize, depth_cap: usize, payoff: KsPayoff) -> Result<ValueReport> {
    let t = b.t();
    if m < t {
        return Err(GrlError::InvalidArgument(format!(
            "horizon m={m} precedes t={t}"
        )));
    }
    if m - t > depth_cap {
        return Err(GrlError::PlanTooDeep {
            depth: m - t,
            cap: depth_cap,
            achievable_eps: None,
        });
    }
    let mut s = KsSearch {
        payoff,
        m,
        n_actions: b.actions().len(),
        n_percepts: b.percepts().len(),
        memo: HashMap::new(),
    };
    let root = b.mixture_cursor();
    let mut values = Vec::with_capacity(s.n_actions);
    for a in 0..s.n_actions {
        values.push(s.q(&root, Action(a))?);
    }
    let argmax = select_action(&values, 0.0);
    Ok(ValueReport {
        value: values[argmax.0],
        argmax,
        action_values: values,
        truncation_bound: 0.0,
        t,
        m,
    })
}

/// V^{*,m}_Ent: expected −log₂ ξ(e_{t:m}) under the mixture, in bits.
pub fn entropy_value(b: &BeliefState, m: usize, depth_cap: usize) -> Result<ValueReport> {
    ks_value(b, m, depth_cap, KsPayoff::Entropy)
}

/// V^{*,m}_IG: expected drop in posterior entropy over percepts t..m, in bits.
pub fn info_value(b: &BeliefState, m: usize, depth_cap: usize) -> Result<ValueReport> {
    ks_value(b, m, depth_cap, KsPayoff::Information)
}
