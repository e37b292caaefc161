//! The environment interface, episode simulation and the environment catalog.

use std::fmt::{self, Debug};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{GrlError, Result};
use crate::history::History;
use crate::rng::RngStream;
use crate::space::{Action, ActionSpace, PerceptId, PerceptSpace};

pub mod catalog;

pub use catalog::{catalog_listing, make_env, orseau_position, EnvSpec};

/// Tolerance on percept mass above 1 and on halt mass of measures.
pub const MASS_TOL: f64 = 1e-12;

/// Exact summary of an environment's state, used as a memoization key.
pub type StateKey = Vec<u64>;

/// A chronological conditional sub-distribution over percepts.
///
/// Environments are queried through cursors: a cursor tracks one history
/// incrementally and answers next-percept queries for it.
pub trait Environment: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn actions(&self) -> &ActionSpace;
    fn percepts(&self) -> &PerceptSpace;
    /// A cursor positioned at the empty history.
    fn cursor(self: Arc<Self>) -> Box<dyn Cursor>;
    /// Whether the percept mass sums to one at every node (so far as known).
    fn is_measure(&self) -> bool {
        true
    }
}

pub type EnvRef = Arc<dyn Environment>;

pub trait Cursor: Send + Sync {
    /// Time step of the next percept.
    fn t(&self) -> usize;
    /// Writes ν(e | h, a) for every percept into `out`.
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()>;
    /// Extends the tracked history by `(a, e)`. Must not fail even for percepts of probability 0.
    fn advance(&mut self, a: Action, e: PerceptId);
    fn fork(&self) -> Box<dyn Cursor>;
    /// If `Some`, two cursors at the same `t` with equal keys have identical futures.
    fn key(&self) -> Option<StateKey> {
        None
    }
}

/// Next-percept probabilities and the remaining halt mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptDist {
    pub probs: Vec<f64>,
    pub halt: f64,
}

pub fn check_distribution(env: &str, probs: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(GrlError::InvalidEnvironment {
                env: env.to_string(),
                detail: format!("percept {i} has probability {p}"),
            });
        }
        sum += p;
    }
    if sum > 1.0 + MASS_TOL {
        return Err(GrlError::InvalidEnvironment {
            env: env.to_string(),
            detail: format!("percept probabilities sum to {sum} > 1"),
        });
    }
    Ok(sum)
}

pub fn cursor_at(env: &EnvRef, h: &History) -> Box<dyn Cursor> {
    let mut c = env.clone().cursor();
    for &(a, e) in h.cycles() {
        c.advance(a, e);
    }
    c
}

pub fn percept_distribution(env: &EnvRef, h: &History, a: Action) -> Result<PerceptDist> {
    let c = cursor_at(env, h);
    let mut probs = vec![0.0; env.percepts().len()];
    c.fill(a, &mut probs)?;
    let sum = check_distribution(env.name(), &probs)?;
    Ok(PerceptDist {
        probs,
        halt: (1.0 - sum).max(0.0),
    })
}

/// ν(e_{1:t} ‖ a_{1:t}) as the product of conditionals along `h`.
pub fn history_likelihood(env: &EnvRef, h: &History) -> Result<f64> {
    let mut c = env.clone().cursor();
    let mut probs = vec![0.0; env.percepts().len()];
    let mut lik = 1.0;
    for &(a, e) in h.cycles() {
        c.fill(a, &mut probs)?;
        check_distribution(env.name(), &probs)?;
        lik *= probs[e.0];
        if lik == 0.0 {
            return Ok(0.0);
        }
        c.advance(a, e);
    }
    Ok(lik)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Percept(PerceptId),
    Halt,
}

/// A running episode: the realized history and reward statistics.
pub struct EpisodeState {
    env: EnvRef,
    cursor: Box<dyn Cursor>,
    history: History,
    halted: bool,
    total_reward: f64,
    scratch: Vec<f64>,
}

impl Debug for EpisodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EpisodeState")
            .field("env", &self.env.name())
            .field("t", &self.history.t())
            .field("halted", &self.halted)
            .field("total_reward", &self.total_reward)
            .finish()
    }
}

impl EpisodeState {
    pub fn new(env: EnvRef) -> Self {
        let cursor = env.clone().cursor();
        let n = env.percepts().len();
        Self {
            env,
            cursor,
            history: History::new(),
            halted: false,
            total_reward: 0.0,
            scratch: vec![0.0; n],
        }
    }

    pub fn env(&self) -> &EnvRef {
        &self.env
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn t(&self) -> usize {
        self.history.t()
    }

    /// Draws the next percept for action `a`. Halting ends the episode.
    pub fn sample_step(&mut self, a: Action, rng: &mut RngStream) -> Result<StepOutcome> {
        if self.halted {
            return Err(GrlError::EpisodeEnded);
        }
        self.cursor.fill(a, &mut self.scratch)?;
        let sum = check_distribution(self.env.name(), &self.scratch)?;
        let u = rng.uniform();
        let total = if self.env.is_measure() && 1.0 - sum <= MASS_TOL {
            sum
        } else {
            1.0
        };
        let target = u * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &p) in self.scratch.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            if target < acc {
                chosen = Some(PerceptId(i));
                break;
            }
        }
        if chosen.is_none() && total == sum {
            // Rounding at the top of the CDF: take the last supported percept.
            chosen = self.scratch.iter().rposition(|&p| p > 0.0).map(PerceptId);
        }
        match chosen {
            Some(e) => {
                self.cursor.advance(a, e);
                self.history.push(a, e);
                self.total_reward += self.env.percepts().reward(e);
                Ok(StepOutcome::Percept(e))
            }
            None => {
                self.halted = true;
                Ok(StepOutcome::Halt)
            }
        }
    }
}

type Behavior = dyn Fn(&History, Action) -> Vec<f64> + Send + Sync;

/// An environment given by a user closure from (history, action) to percept probabilities.
pub struct FnEnvironment {
    name: String,
    actions: ActionSpace,
    percepts: PerceptSpace,
    behavior: Box<Behavior>,
    measure: AtomicBool,
}

impl Debug for FnEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnEnvironment({})", self.name)
    }
}

impl FnEnvironment {
    pub fn new(
        name: impl Into<String>,
        actions: ActionSpace,
        percepts: PerceptSpace,
        behavior: impl Fn(&History, Action) -> Vec<f64> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self {
            name: name.into(),
            actions,
            percepts,
            behavior: Box::new(behavior),
            measure: AtomicBool::new(true),
        })
    }
}

impl Environment for FnEnvironment {
    fn name(&self) -> &str {
        &self.name
    }
    fn actions(&self) -> &ActionSpace {
        &self.actions
    }
    fn percepts(&self) -> &PerceptSpace {
        &self.percepts
    }
    fn cursor(self: Arc<Self>) -> Box<dyn Cursor> {
        Box::new(FnCursor {
            env: self,
            history: History::new(),
        })
    }
    /// Computed from the nodes queried so far.
    fn is_measure(&self) -> bool {
        self.measure.load(Ordering::Relaxed)
    }
}

struct FnCursor {
    env: Arc<FnEnvironment>,
    history: History,
}

impl Cursor for FnCursor {
    fn t(&self) -> usize {
        self.history.t()
    }
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        let probs = (self.env.behavior)(&self.history, a);
        if probs.len() != out.len() {
            return Err(GrlError::InvalidEnvironment {
                env: self.env.name.clone(),
                detail: format!("{} probabilities for {} percepts", probs.len(), out.len()),
            });
        }
        let sum = check_distribution(&self.env.name, &probs)?;
        if 1.0 - sum > MASS_TOL {
            self.env.measure.store(false, Ordering::Relaxed);
        }
        out.copy_from_slice(&probs);
        Ok(())
    }
    fn advance(&mut self, a: Action, e: PerceptId) {
        self.history.push(a, e);
    }
    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(FnCursor {
            env: self.env.clone(),
            history: self.history.clone(),
        })
    }
}
