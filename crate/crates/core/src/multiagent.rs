//! Multi-agent environments, joint stepping, subjective environments and ε-Nash monitoring.

use std::fmt::{self, Debug};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::discount::DiscountSchedule;
use crate::envs::{Cursor, Environment};
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::planner::{optimal_value, policy_value, PlanQuery};
use crate::policy::{one_hot, Policy, PolicyRef};
use crate::rng::RngStream;
use crate::space::{Action, ActionSpace, PerceptId, PerceptSpace};

/// Default cap on the number of hidden joint histories a subjective environment tracks.
pub const HIDDEN_BRANCH_CAP: usize = 256;

/// σ: joint history × joint action → distribution over joint percepts.
pub trait MultiAgentEnv: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn n_agents(&self) -> usize;
    fn actions(&self, i: usize) -> &ActionSpace;
    fn percepts(&self, i: usize) -> &PerceptSpace;
    /// Joint percepts with their probabilities. `projections[i]` is agent i's history.
    fn joint_distribution(
        &self,
        projections: &[History],
        actions: &[Action],
    ) -> Result<Vec<(Vec<PerceptId>, f64)>>;
}

pub type MultiEnvRef = Arc<dyn MultiAgentEnv>;

/// A deterministic n-player matrix game repeated forever.
#[derive(Debug)]
pub struct MatrixGame {
    name: String,
    actions: ActionSpace,
    percepts: PerceptSpace,
    /// `payoff[a1][a2]` = (percept of agent 1, percept of agent 2).
    payoff: Vec<Vec<(PerceptId, PerceptId)>>,
}

impl MatrixGame {
    /// Agent 1 (index 0) gets reward 1 if both actions match, agent 2 otherwise.
    pub fn matching_pennies() -> Self {
        let percepts = PerceptSpace::rewards(&[("0", 0.0), ("1", 1.0)]).expect("valid");
        let (lose, win) = (PerceptId(0), PerceptId(1));
        Self {
            name: "matching_pennies".into(),
            actions: ActionSpace::numbered(2).expect("valid"),
            percepts,
            payoff: vec![vec![(win, lose), (lose, win)], vec![(lose, win), (win, lose)]],
        }
    }

    /// Prisoner's dilemma with α = cooperate, β = defect.
    pub fn prisoners_dilemma() -> Self {
        let percepts =
            PerceptSpace::rewards(&[("0", 0.0), ("1/4", 0.25), ("3/4", 0.75), ("1", 1.0)])
                .expect("valid");
        let p = PerceptId;
        Self {
            name: "prisoners_dilemma".into(),
            actions: ActionSpace::new(["cooperate", "defect"]).expect("valid"),
            percepts,
            payoff: vec![vec![(p(2), p(2)), (p(0), p(3))], vec![(p(3), p(0)), (p(1), p(1))]],
        }
    }
}

impl MultiAgentEnv for MatrixGame {
    fn name(&self) -> &str {
        &self.name
    }
    fn n_agents(&self) -> usize {
        2
    }
    fn actions(&self, _i: usize) -> &ActionSpace {
        &self.actions
    }
    fn percepts(&self, _i: usize) -> &PerceptSpace {
        &self.percepts
    }
    fn joint_distribution(
        &self,
        _projections: &[History],
        actions: &[Action],
    ) -> Result<Vec<(Vec<PerceptId>, f64)>> {
        let (e1, e2) = self
            .payoff
            .get(actions[0].0)
            .and_then(|row| row.get(actions[1].0))
            .ok_or_else(|| GrlError::InvalidArgument(format!("bad joint action {actions:?}")))?;
        Ok(vec![(vec![*e1, *e2], 1.0)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSpec {
    MatchingPennies,
    PrisonersDilemma,
}

impl GameSpec {
    pub fn build(self) -> MultiEnvRef {
        match self {
            GameSpec::MatchingPennies => Arc::new(MatrixGame::matching_pennies()),
            GameSpec::PrisonersDilemma => Arc::new(MatrixGame::prisoners_dilemma()),
        }
    }
}

/// Tit-for-tat in the prisoner's dilemma: cooperate first, then repeat the opponent's
/// last move, read off the own reward (¾ or 1 means the opponent cooperated).
#[derive(Debug, Clone, Copy)]
pub struct TitForTat;

impl Policy for TitForTat {
    fn num_actions(&self) -> usize {
        2
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        let a = match h.last() {
            None => Action(0),
            Some((_, e)) if e.0 >= 2 => Action(0),
            Some(_) => Action(1),
        };
        Ok(one_hot(2, a))
    }
    fn memo_key(&self, h: &History) -> Option<crate::envs::StateKey> {
        Some(vec![h.last().map_or(2, |(_, e)| u64::from(e.0 >= 2))])
    }
}

/// The joint history as per-agent projections; together they determine it.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrace {
    pub projections: Vec<History>,
}

impl JointTrace {
    pub fn new(n: usize) -> Self {
        Self {
            projections: vec![History::new(); n],
        }
    }

    pub fn t(&self) -> usize {
        self.projections[0].t()
    }

    pub fn joint_actions(&self, t: usize) -> Vec<Action> {
        self.projections.iter().map(|h| h.at(t).0).collect()
    }

    pub fn joint_percepts(&self, t: usize) -> Vec<PerceptId> {
        self.projections.iter().map(|h| h.at(t).1).collect()
    }
}

/// One joint step: every agent acts on its own projection, then the joint percept is sampled.
pub fn joint_step(
    env: &dyn MultiAgentEnv,
    trace: &mut JointTrace,
    agents: &mut [Box<dyn Agent>],
    rng: &mut RngStream,
) -> Result<Vec<PerceptId>> {
    if agents.len() != env.n_agents() {
        return Err(GrlError::InvalidArgument(format!(
            "{} agents for a {}-agent environment",
            agents.len(),
            env.n_agents()
        )));
    }
    let actions = agents
        .iter_mut()
        .map(|ag| ag.act())
        .collect::<Result<Vec<_>>>()?;
    let outcomes = env.joint_distribution(&trace.projections, &actions)?;
    let weights: Vec<f64> = outcomes.iter().map(|(_, p)| *p).collect();
    let (percepts, _) = &outcomes[rng.categorical(&weights)];
    for (i, ag) in agents.iter_mut().enumerate() {
        ag.observe(actions[i], percepts[i])?;
        trace.projections[i].push(actions[i], percepts[i]);
    }
    Ok(percepts.clone())
}

/// Agent i's view of a multi-agent environment when the others follow fixed policies.
pub struct SubjectiveEnv {
    name: String,
    env: MultiEnvRef,
    /// Policies of all agents; the entry at `i` is ignored.
    policies: Vec<Option<PolicyRef>>,
    i: usize,
    cap: usize,
}

impl Debug for SubjectiveEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubjectiveEnv({})", self.name)
    }
}

impl SubjectiveEnv {
    /// `others` lists the policies of agents j ≠ i in index order.
    pub fn new(env: MultiEnvRef, others: Vec<PolicyRef>, i: usize) -> Result<Arc<Self>> {
        Self::with_cap(env, others, i, HIDDEN_BRANCH_CAP)
    }

    pub fn with_cap(
        env: MultiEnvRef,
        others: Vec<PolicyRef>,
        i: usize,
        cap: usize,
    ) -> Result<Arc<Self>> {
        let n = env.n_agents();
        if i >= n || others.len() + 1 != n {
            return Err(GrlError::InvalidArgument(format!(
                "need {} opponent policies for agent {i}",
                n.saturating_sub(1)
            )));
        }
        let mut it = others.into_iter();
        let policies = (0..n)
            .map(|j| if j == i { None } else { it.next() })
            .collect();
        Ok(Arc::new(Self {
            name: format!("{}_subjective_{}", env.name(), i + 1),
            env,
            policies,
            i,
            cap,
        }))
    }

    /// A cursor positioned at agent i's projection of `trace`, with the hidden part known.
    pub fn cursor_from(self: &Arc<Self>, trace: &JointTrace) -> Box<dyn Cursor> {
        Box::new(SubjectiveCursor {
            env: self.clone(),
            branches: vec![(1.0, trace.projections.clone())],
            t: trace.t(),
            overflow: false,
        })
    }

    /// A planning query for agent i rooted at the realized joint history.
    pub fn query(
        self: &Arc<Self>,
        trace: &JointTrace,
        m: usize,
        sched: &DiscountSchedule,
    ) -> PlanQuery {
        PlanQuery::for_cursor(
            self.cursor_from(trace),
            trace.projections[self.i].clone(),
            self.env.actions(self.i),
            self.env.percepts(self.i),
            &self.name,
            m,
            sched,
        )
    }

    /// Joint actions of the others with their probabilities, for agent i playing `a`.
    fn joint_actions(&self, hist: &[History], a: Action) -> Result<Vec<(Vec<Action>, f64)>> {
        let mut out = vec![(Vec::new(), 1.0)];
        for (j, pol) in self.policies.iter().enumerate() {
            let choices: Vec<(Action, f64)> = match pol {
                None => vec![(a, 1.0)],
                Some(p) => p
                    .action_distribution(&hist[j])?
                    .into_iter()
                    .enumerate()
                    .filter(|(_, q)| *q > 0.0)
                    .map(|(b, q)| (Action(b), q))
                    .collect(),
            };
            let mut next = Vec::with_capacity(out.len() * choices.len());
            for (prefix, w) in &out {
                for &(b, q) in &choices {
                    let mut v = prefix.clone();
                    v.push(b);
                    next.push((v, w * q));
                }
            }
            out = next;
        }
        Ok(out)
    }
}

impl Environment for SubjectiveEnv {
    fn name(&self) -> &str {
        &self.name
    }
    fn actions(&self) -> &ActionSpace {
        self.env.actions(self.i)
    }
    fn percepts(&self) -> &PerceptSpace {
        self.env.percepts(self.i)
    }
    fn cursor(self: Arc<Self>) -> Box<dyn Cursor> {
        let n = self.env.n_agents();
        self.cursor_from(&JointTrace::new(n))
    }
}

#[derive(Clone)]
struct SubjectiveCursor {
    env: Arc<SubjectiveEnv>,
    /// Weighted joint histories consistent with agent i's projection; weights sum to 1.
    branches: Vec<(f64, Vec<History>)>,
    t: usize,
    overflow: bool,
}

impl Cursor for SubjectiveCursor {
    fn t(&self) -> usize {
        self.t
    }

    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        if self.overflow {
            return Err(GrlError::EnumerationCap(format!(
                "more than {} hidden joint histories in {}",
                self.env.cap, self.env.name
            )));
        }
        out.fill(0.0);
        let i = self.env.i;
        for (w, hist) in &self.branches {
            for (acts, q) in self.env.joint_actions(hist, a)? {
                for (es, p) in self.env.env.joint_distribution(hist, &acts)? {
                    out[es[i].0] += w * q * p;
                }
            }
        }
        Ok(())
    }

    fn advance(&mut self, a: Action, e: PerceptId) {
        let i = self.env.i;
        let mut next: Vec<(f64, Vec<History>)> = Vec::new();
        for (w, hist) in &self.branches {
            let Ok(joint) = self.env.joint_actions(hist, a) else {
                continue;
            };
            for (acts, q) in joint {
                let Ok(dist) = self.env.env.joint_distribution(hist, &acts) else {
                    continue;
                };
                for (es, p) in dist {
                    let mass = w * q * p;
                    if es[i] != e || mass == 0.0 {
                        continue;
                    }
                    let mut h = hist.clone();
                    for (j, hj) in h.iter_mut().enumerate() {
                        hj.push(acts[j], es[j]);
                    }
                    match next.iter_mut().find(|(_, g)| *g == h) {
                        Some((v, _)) => *v += mass,
                        None => next.push((mass, h)),
                    }
                }
            }
        }
        let total: f64 = next.iter().map(|(w, _)| w).sum();
        if total > 0.0 {
            for (w, _) in &mut next {
                *w /= total;
            }
        }
        self.overflow |= next.len() > self.env.cap;
        self.branches = next;
        self.t += 1;
    }

    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(self.clone())
    }
}

/// Parameters for ε-best-response checks.
#[derive(Debug, Clone)]
pub struct NashConfig {
    pub steps: usize,
    pub eps: f64,
    pub checkpoints: Vec<usize>,
    /// Gap evaluated at horizon m = t + `gap_depth`.
    pub gap_depth: usize,
    pub sched: DiscountSchedule,
    pub depth_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRow {
    /// Time step of the next action when the policies were frozen.
    pub t: usize,
    pub gaps: Vec<f64>,
    pub ok: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashReport {
    pub trace: JointTrace,
    pub checkpoints: Vec<CheckpointRow>,
}

impl NashReport {
    /// Fraction of checkpoints with t ≥ `from` at which agent i was an ε-best response.
    pub fn indicator_fraction(&self, i: usize, from: usize) -> f64 {
        let rows: Vec<_> = self.checkpoints.iter().filter(|r| r.t >= from).collect();
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().filter(|r| r.ok[i]).count() as f64 / rows.len() as f64
    }
}

/// ε-best-response gaps of frozen policies at the current joint history.
pub fn best_response_gaps(
    env: &MultiEnvRef,
    trace: &JointTrace,
    policies: &[PolicyRef],
    m: usize,
    sched: &DiscountSchedule,
    depth_cap: usize,
) -> Result<Vec<f64>> {
    (0..env.n_agents())
        .map(|i| {
            let others = policies
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let sigma = SubjectiveEnv::new(env.clone(), others, i)?;
            let q = sigma.query(trace, m, sched).with_depth_cap(depth_cap);
            Ok(optimal_value(&q)?.value - policy_value(&q, policies[i].as_ref())?)
        })
        .collect()
}

/// Runs the agents jointly and records best-response gaps of their snapshots at checkpoints.
pub fn nash_monitor(
    env: &MultiEnvRef,
    agents: &mut [Box<dyn Agent>],
    cfg: &NashConfig,
    rng: &mut RngStream,
) -> Result<NashReport> {
    let mut trace = JointTrace::new(env.n_agents());
    let mut rows = Vec::new();
    let mut checkpoints = cfg.checkpoints.clone();
    checkpoints.sort_unstable();
    let mut next = checkpoints.iter().peekable();
    for _ in 0..=cfg.steps {
        let t = trace.t();
        while next.peek().is_some_and(|&&c| c < t) {
            next.next();
        }
        if next.peek() == Some(&&t) {
            next.next();
            let snaps: Vec<PolicyRef> = agents.iter().map(|a| Arc::from(a.snapshot())).collect();
            let gaps = best_response_gaps(
                env,
                &trace,
                &snaps,
                t + cfg.gap_depth,
                &cfg.sched,
                cfg.depth_cap,
            )?;
            rows.push(CheckpointRow {
                t,
                ok: gaps.iter().map(|g| *g < cfg.eps).collect(),
                gaps,
            });
        }
        if t > cfg.steps {
            break;
        }
        joint_step(env.as_ref(), &mut trace, agents, rng)?;
    }
    Ok(NashReport {
        trace,
        checkpoints: rows,
    })
}
