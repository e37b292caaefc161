//! Stateful policies: Bayes-optimal, Thompson sampling, BayesExp, knowledge-seeking and fixed baselines.

use std::fmt::{self, Debug};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discount::DiscountSchedule;
use crate::envs::cursor_at;
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::mixture::BeliefState;
use crate::planner::{
    default_depth_cap, entropy_value, eps_optimal_action, info_value, PlanQuery,
};
use crate::policy::{one_hot, Policy, PolicyRef, PolicySpec};
use crate::rng::{inverse_cdf, RngStream};
use crate::space::{Action, PerceptId};

/// The exploration schedule ε_t: positive, nonincreasing, tending to 0 (except `constant`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsSchedule {
    InvT,
    #[default]
    InvSqrtT,
    Constant(f64),
}

impl EpsSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            EpsSchedule::InvT => 1.0 / t as f64,
            EpsSchedule::InvSqrtT => 1.0 / (t as f64).sqrt(),
            EpsSchedule::Constant(c) => c,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            EpsSchedule::Constant(c) if !(c > 0.0 && c <= 1.0) => Err(GrlError::InvalidArgument(
                format!("constant eps schedule must be in (0,1], got {c}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Planning parameters shared by the learning agents.
#[derive(Debug, Clone)]
pub struct Planning {
    pub sched: DiscountSchedule,
    pub eps: EpsSchedule,
    /// Accuracy for ε-optimal action selection; `None` uses ε_t.
    pub planning_eps: Option<f64>,
    pub depth_cap: usize,
}

impl Planning {
    pub fn new(sched: DiscountSchedule) -> Self {
        Self {
            sched,
            eps: EpsSchedule::default(),
            planning_eps: None,
            depth_cap: default_depth_cap(),
        }
    }

    pub fn with_eps(mut self, eps: EpsSchedule) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_planning_eps(mut self, eps: f64) -> Self {
        self.planning_eps = Some(eps);
        self
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    fn planning_eps_at(&self, t: usize) -> f64 {
        self.planning_eps.unwrap_or_else(|| self.eps.at(t))
    }

    /// H_t(ε_t), with Γ_t = 0 treated as 0.
    fn horizon(&self, t: usize) -> Result<usize> {
        Ok(self.sched.effective_horizon(t, self.eps.at(t).min(1.0))?.steps)
    }

    fn bayes_action(&self, b: &BeliefState) -> Result<Action> {
        let q = PlanQuery::for_belief(b, b.t(), &self.sched).with_depth_cap(self.depth_cap);
        Ok(eps_optimal_action(q, self.planning_eps_at(b.t()))?.action)
    }

    fn member_action(&self, b: &BeliefState, member: usize, h: &History) -> Result<Action> {
        let env = &b.members()[member];
        let cursor = if h == b.history() {
            b.member_cursor(member)
        } else {
            cursor_at(env, h)
        };
        let q = PlanQuery::for_cursor(
            cursor,
            h.clone(),
            env.actions(),
            env.percepts(),
            env.name(),
            h.t(),
            &self.sched,
        )
        .with_depth_cap(self.depth_cap);
        Ok(eps_optimal_action(q, self.planning_eps_at(h.t()))?.action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Exploit,
    /// Thompson sampling: following the sampled member.
    Committed { member: usize, steps_remaining: usize },
    /// BayesExp / knowledge-seeking: following the information-seeking policy.
    Explore { steps_remaining: usize },
    Fixed,
}

/// Diagnostics of the last `act` call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub t: usize,
    pub mode: Mode,
    pub eps_t: f64,
    /// A Thompson resample or a BayesExp exploration phase started at this step.
    pub boundary: bool,
    /// A zero-length commitment was stretched to one step.
    pub zero_commitment: bool,
    /// V*_IG at decision time (BayesExp boundaries, knowledge-seeking agents).
    pub info_value: Option<f64>,
}

impl Decision {
    fn new(t: usize, eps_t: f64, mode: Mode) -> Self {
        Self {
            t,
            mode,
            eps_t,
            boundary: false,
            zero_commitment: false,
            info_value: None,
        }
    }
}

pub trait Agent: Send + Sync {
    fn name(&self) -> &str;
    fn history(&self) -> &History;
    /// Chooses the action at the current history. Must be followed by `observe` with that action.
    fn act(&mut self) -> Result<Action>;
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()>;
    /// Back to the prior, t = 1, no commitment, rng rewound.
    fn reset(&mut self);
    /// The agent's policy frozen at the current history, defined on continuations of it.
    fn snapshot(&self) -> Box<dyn Policy>;
    fn clone_box(&self) -> Box<dyn Agent>;
    fn decision(&self) -> Option<&Decision>;
    fn belief(&self) -> Option<&BeliefState> {
        None
    }
}

impl Clone for Box<dyn Agent> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

impl Debug for dyn Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Agent({} at t={})", self.name(), self.history().t())
    }
}

/// Snapshot of a deterministic agent: replays the continuation on a clone.
struct ReplaySnapshot {
    agent: Box<dyn Agent>,
    n: usize,
}

impl Debug for ReplaySnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Snapshot({})", self.agent.name())
    }
}

fn suffix<'a>(root: &History, h: &'a History) -> Result<&'a [(Action, PerceptId)]> {
    if !h.starts_with(root) {
        return Err(GrlError::InvalidArgument(
            "snapshot queried at a history that does not extend its own".into(),
        ));
    }
    Ok(&h.cycles()[root.len()..])
}

impl Policy for ReplaySnapshot {
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        let mut agent = self.agent.clone_box();
        for &(a, e) in suffix(self.agent.history(), h)? {
            agent.act()?;
            agent.observe(a, e)?;
        }
        Ok(one_hot(self.n, agent.act()?))
    }
}

#[derive(Clone)]
pub struct BayesAgent {
    prior: BeliefState,
    belief: BeliefState,
    planning: Planning,
    decision: Option<Decision>,
}

impl BayesAgent {
    pub fn new(belief: BeliefState, planning: Planning) -> Self {
        Self {
            prior: belief.clone(),
            belief,
            planning,
            decision: None,
        }
    }
}

impl Agent for BayesAgent {
    fn name(&self) -> &str {
        "bayes"
    }
    fn history(&self) -> &History {
        self.belief.history()
    }
    fn act(&mut self) -> Result<Action> {
        let t = self.belief.t();
        let a = self.planning.bayes_action(&self.belief)?;
        self.decision = Some(Decision::new(t, self.planning.eps.at(t), Mode::Exploit));
        Ok(a)
    }
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()> {
        self.belief.update(a, e)
    }
    fn reset(&mut self) {
        self.belief = self.prior.clone();
        self.decision = None;
    }
    fn snapshot(&self) -> Box<dyn Policy> {
        Box::new(ReplaySnapshot {
            agent: self.clone_box(),
            n: self.belief.actions().len(),
        })
    }
    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
    fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }
    fn belief(&self) -> Option<&BeliefState> {
        Some(&self.belief)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Commitment {
    member: usize,
    remaining: usize,
}

#[derive(Clone)]
pub struct ThompsonAgent {
    prior: BeliefState,
    belief: BeliefState,
    planning: Planning,
    rng: RngStream,
    commitment: Option<Commitment>,
    decision: Option<Decision>,
}

impl ThompsonAgent {
    pub fn new(belief: BeliefState, planning: Planning, rng: RngStream) -> Self {
        Self {
            prior: belief.clone(),
            belief,
            planning,
            rng,
            commitment: None,
            decision: None,
        }
    }

    /// The member sampled at the last boundary, if a commitment is running.
    pub fn sampled(&self) -> Option<usize> {
        self.commitment.map(|c| c.member)
    }
}

/// Commitment length at a boundary: H_t(ε_t), with 0 stretched to 1.
fn commitment_length(p: &Planning, t: usize) -> Result<(usize, bool)> {
    let h = p.horizon(t)?;
    Ok(if h == 0 { (1, true) } else { (h, false) })
}

impl Agent for ThompsonAgent {
    fn name(&self) -> &str {
        "thompson"
    }
    fn history(&self) -> &History {
        self.belief.history()
    }
    fn act(&mut self) -> Result<Action> {
        let t = self.belief.t();
        let mut boundary = false;
        let mut zero = false;
        let mut c = match self.commitment {
            Some(c) if c.remaining > 0 => c,
            _ => {
                boundary = true;
                let member = inverse_cdf(self.belief.posterior(), self.rng.uniform());
                let (len, z) = commitment_length(&self.planning, t)?;
                zero = z;
                Commitment {
                    member,
                    remaining: len,
                }
            }
        };
        let a = self
            .planning
            .member_action(&self.belief, c.member, self.belief.history())?;
        c.remaining -= 1;
        self.commitment = Some(c);
        let mut d = Decision::new(
            t,
            self.planning.eps.at(t),
            Mode::Committed {
                member: c.member,
                steps_remaining: c.remaining,
            },
        );
        d.boundary = boundary;
        d.zero_commitment = zero;
        self.decision = Some(d);
        Ok(a)
    }
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()> {
        self.belief.update(a, e)
    }
    fn reset(&mut self) {
        self.belief = self.prior.clone();
        self.rng.restart();
        self.commitment = None;
        self.decision = None;
    }
    fn snapshot(&self) -> Box<dyn Policy> {
        Box::new(ThompsonSnapshot {
            root: self.belief.clone(),
            planning: self.planning.clone(),
            commitment: self.commitment.filter(|c| c.remaining > 0),
        })
    }
    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
    fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }
    fn belief(&self) -> Option<&BeliefState> {
        Some(&self.belief)
    }
}

/// Thompson sampling as a policy: within the running commitment it follows the
/// sampled member; after later boundaries the sampled member is marginalized,
/// conditioned on the actions taken since that boundary.
struct ThompsonSnapshot {
    root: BeliefState,
    planning: Planning,
    commitment: Option<Commitment>,
}

impl Debug for ThompsonSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ThompsonSnapshot(t={})", self.root.t())
    }
}

impl Policy for ThompsonSnapshot {
    fn num_actions(&self) -> usize {
        self.root.actions().len()
    }

    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        let n = self.num_actions();
        let cycles = suffix(self.root.history(), h)?;
        let t0 = self.root.t();
        let th = h.t();
        let mut boundary = t0;
        if let Some(c) = self.commitment {
            boundary = t0 + c.remaining;
            if th < boundary {
                return Ok(one_hot(n, self.planning.member_action(&self.root, c.member, h)?));
            }
        }
        loop {
            let (len, _) = commitment_length(&self.planning, boundary)?;
            if boundary + len > th {
                break;
            }
            boundary += len;
        }
        let mut b = self.root.clone();
        for &(a, e) in &cycles[..boundary - t0] {
            b.update(a, e)?;
        }
        let prefix = b.history().clone();
        let mut weights = b.posterior().to_vec();
        let mut hk = prefix.clone();
        for &(a, e) in &cycles[boundary - t0..] {
            for (i, w) in weights.iter_mut().enumerate() {
                if *w > 0.0 && self.planning.member_action(&b, i, &hk)? != a {
                    *w = 0.0;
                }
            }
            hk.push(a, e);
        }
        if weights.iter().all(|&w| w == 0.0) {
            weights = b.posterior().to_vec();
        }
        let total: f64 = weights.iter().sum();
        let mut dist = vec![0.0; n];
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                dist[self.planning.member_action(&b, i, h)?.0] += w / total;
            }
        }
        Ok(dist)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Phase {
    m: usize,
    remaining: usize,
}

#[derive(Clone)]
pub struct BayesExpAgent {
    prior: BeliefState,
    belief: BeliefState,
    planning: Planning,
    phase: Option<Phase>,
    decision: Option<Decision>,
}

impl BayesExpAgent {
    pub fn new(belief: BeliefState, planning: Planning) -> Self {
        Self {
            prior: belief.clone(),
            belief,
            planning,
            phase: None,
            decision: None,
        }
    }
}

impl Agent for BayesExpAgent {
    fn name(&self) -> &str {
        "bayesexp"
    }
    fn history(&self) -> &History {
        self.belief.history()
    }
    fn act(&mut self) -> Result<Action> {
        let t = self.belief.t();
        let eps_t = self.planning.eps.at(t);
        if let Some(mut p) = self.phase.filter(|p| p.remaining > 0) {
            let a = info_value(&self.belief, p.m, self.planning.depth_cap)?.argmax;
            p.remaining -= 1;
            self.phase = Some(p);
            self.decision = Some(Decision::new(
                t,
                eps_t,
                Mode::Explore {
                    steps_remaining: p.remaining,
                },
            ));
            return Ok(a);
        }
        let h = self.planning.horizon(t)?;
        let ig = info_value(&self.belief, t + h, self.planning.depth_cap)?;
        if ig.value > eps_t {
            let (len, zero) = commitment_length(&self.planning, t)?;
            self.phase = Some(Phase {
                m: t + h,
                remaining: len - 1,
            });
            let mut d = Decision::new(
                t,
                eps_t,
                Mode::Explore {
                    steps_remaining: len - 1,
                },
            );
            d.boundary = true;
            d.zero_commitment = zero;
            d.info_value = Some(ig.value);
            self.decision = Some(d);
            Ok(ig.argmax)
        } else {
            self.phase = None;
            let a = self.planning.bayes_action(&self.belief)?;
            let mut d = Decision::new(t, eps_t, Mode::Exploit);
            d.info_value = Some(ig.value);
            self.decision = Some(d);
            Ok(a)
        }
    }
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()> {
        self.belief.update(a, e)
    }
    fn reset(&mut self) {
        self.belief = self.prior.clone();
        self.phase = None;
        self.decision = None;
    }
    fn snapshot(&self) -> Box<dyn Policy> {
        Box::new(ReplaySnapshot {
            agent: self.clone_box(),
            n: self.belief.actions().len(),
        })
    }
    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
    fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }
    fn belief(&self) -> Option<&BeliefState> {
        Some(&self.belief)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsaMode {
    Entropy,
    Information,
}

/// Knowledge-seeking agent: maximizes entropy- or information-seeking value over `lookahead + 1` percepts.
#[derive(Clone)]
pub struct KsaAgent {
    prior: BeliefState,
    belief: BeliefState,
    mode: KsaMode,
    lookahead: usize,
    depth_cap: usize,
    decision: Option<Decision>,
}

impl KsaAgent {
    pub fn new(belief: BeliefState, mode: KsaMode, lookahead: usize, depth_cap: usize) -> Self {
        Self {
            prior: belief.clone(),
            belief,
            mode,
            lookahead,
            depth_cap,
            decision: None,
        }
    }
}

impl Agent for KsaAgent {
    fn name(&self) -> &str {
        match self.mode {
            KsaMode::Entropy => "ksa_entropy",
            KsaMode::Information => "ksa_information",
        }
    }
    fn history(&self) -> &History {
        self.belief.history()
    }
    fn act(&mut self) -> Result<Action> {
        let t = self.belief.t();
        let m = t + self.lookahead;
        let r = match self.mode {
            KsaMode::Entropy => entropy_value(&self.belief, m, self.depth_cap)?,
            KsaMode::Information => info_value(&self.belief, m, self.depth_cap)?,
        };
        let mut d = Decision::new(t, 0.0, Mode::Explore { steps_remaining: 0 });
        d.info_value = Some(r.value);
        self.decision = Some(d);
        Ok(r.argmax)
    }
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()> {
        self.belief.update(a, e)
    }
    fn reset(&mut self) {
        self.belief = self.prior.clone();
        self.decision = None;
    }
    fn snapshot(&self) -> Box<dyn Policy> {
        Box::new(ReplaySnapshot {
            agent: self.clone_box(),
            n: self.belief.actions().len(),
        })
    }
    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
    fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }
    fn belief(&self) -> Option<&BeliefState> {
        Some(&self.belief)
    }
}

/// A fixed policy, sampled with the agent's own rng.
#[derive(Clone)]
pub struct FixedAgent {
    name: String,
    policy: PolicyRef,
    rng: RngStream,
    history: History,
    decision: Option<Decision>,
}

impl FixedAgent {
    pub fn new(name: impl Into<String>, policy: PolicyRef, rng: RngStream) -> Self {
        Self {
            name: name.into(),
            policy,
            rng,
            history: History::new(),
            decision: None,
        }
    }
}

#[derive(Debug)]
struct SharedPolicy(PolicyRef);

impl Policy for SharedPolicy {
    fn num_actions(&self) -> usize {
        self.0.num_actions()
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        self.0.action_distribution(h)
    }
    fn memo_key(&self, h: &History) -> Option<crate::envs::StateKey> {
        self.0.memo_key(h)
    }
}

impl Agent for FixedAgent {
    fn name(&self) -> &str {
        &self.name
    }
    fn history(&self) -> &History {
        &self.history
    }
    fn act(&mut self) -> Result<Action> {
        let d = self.policy.action_distribution(&self.history)?;
        self.decision = Some(Decision::new(self.history.t(), 0.0, Mode::Fixed));
        Ok(Action(self.rng.categorical(&d)))
    }
    fn observe(&mut self, a: Action, e: PerceptId) -> Result<()> {
        self.history.push(a, e);
        Ok(())
    }
    fn reset(&mut self) {
        self.history = History::new();
        self.rng.restart();
        self.decision = None;
    }
    fn snapshot(&self) -> Box<dyn Policy> {
        Box::new(SharedPolicy(self.policy.clone()))
    }
    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
    fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }
}

/// Serializable agent descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Bayes {
        #[serde(default)]
        eps_schedule: EpsSchedule,
        #[serde(default)]
        planning_eps: Option<f64>,
        #[serde(default)]
        depth_cap: Option<usize>,
    },
    Thompson {
        #[serde(default)]
        eps_schedule: EpsSchedule,
        #[serde(default)]
        planning_eps: Option<f64>,
        #[serde(default)]
        depth_cap: Option<usize>,
    },
    BayesExp {
        #[serde(default)]
        eps_schedule: EpsSchedule,
        #[serde(default)]
        planning_eps: Option<f64>,
        #[serde(default)]
        depth_cap: Option<usize>,
    },
    Ksa {
        mode: KsaMode,
        #[serde(default)]
        lookahead: usize,
        #[serde(default)]
        depth_cap: Option<usize>,
    },
    Fixed {
        policy: PolicySpec,
    },
}

impl AgentSpec {
    pub fn needs_belief(&self) -> bool {
        !matches!(self, AgentSpec::Fixed { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            AgentSpec::Bayes { .. } => "bayes",
            AgentSpec::Thompson { .. } => "thompson",
            AgentSpec::BayesExp { .. } => "bayesexp",
            AgentSpec::Ksa { .. } => "ksa",
            AgentSpec::Fixed { .. } => "fixed",
        }
    }

    /// Builds the agent. Learning agents need `belief`; fixed agents need `actions`.
    pub fn build(
        &self,
        belief: Option<BeliefState>,
        actions: &crate::space::ActionSpace,
        sched: &DiscountSchedule,
        rng: RngStream,
    ) -> Result<Box<dyn Agent>> {
        let need = || {
            belief.clone().ok_or_else(|| {
                GrlError::InvalidArgument(format!(
                    "agent `{}` needs an environment class",
                    self.label()
                ))
            })
        };
        let planning = |eps: &EpsSchedule, pe: &Option<f64>, cap: &Option<usize>| -> Result<Planning> {
            eps.validate()?;
            if let Some(p) = pe {
                if !(*p > 0.0) {
                    return Err(GrlError::InvalidArgument(format!(
                        "planning_eps must be positive, got {p}"
                    )));
                }
            }
            let mut pl = Planning::new(sched.clone()).with_eps(*eps);
            pl.planning_eps = *pe;
            if let Some(c) = cap {
                pl.depth_cap = *c;
            }
            Ok(pl)
        };
        Ok(match self {
            AgentSpec::Bayes {
                eps_schedule,
                planning_eps,
                depth_cap,
            } => Box::new(BayesAgent::new(
                need()?,
                planning(eps_schedule, planning_eps, depth_cap)?,
            )),
            AgentSpec::Thompson {
                eps_schedule,
                planning_eps,
                depth_cap,
            } => Box::new(ThompsonAgent::new(
                need()?,
                planning(eps_schedule, planning_eps, depth_cap)?,
                rng,
            )),
            AgentSpec::BayesExp {
                eps_schedule,
                planning_eps,
                depth_cap,
            } => Box::new(BayesExpAgent::new(
                need()?,
                planning(eps_schedule, planning_eps, depth_cap)?,
            )),
            AgentSpec::Ksa {
                mode,
                lookahead,
                depth_cap,
            } => Box::new(KsaAgent::new(
                need()?,
                *mode,
                *lookahead,
                depth_cap.unwrap_or_else(default_depth_cap),
            )),
            AgentSpec::Fixed { policy } => {
                Box::new(FixedAgent::new("fixed", policy.build(actions)?, rng))
            }
        })
    }
}

/// A snapshot policy shared behind an `Arc`.
pub fn shared(p: Box<dyn Policy>) -> PolicyRef {
    Arc::from(p)
}
