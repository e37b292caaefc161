//! Priors, posteriors and the Bayesian mixture environment.

use std::fmt::{self, Debug};
use std::sync::Arc;

use crate::envs::{check_distribution, Cursor, EnvRef, Environment, StateKey};
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::info::entropy;
use crate::policy::PolicyRef;
use crate::space::{Action, ActionSpace, PerceptId, PerceptSpace};

/// Posterior weights below this are set to zero and the member is dropped.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// One Bayes-rule step: `w_i ← w_i·l_i / Σ_j w_j·l_j`.
///
/// Returns the mixture probability Σ w_i·l_i, or `None` (weights untouched) if it is zero.
pub fn bayes_update(weights: &mut [f64], likelihoods: &[f64]) -> Option<f64> {
    let total: f64 = weights
        .iter()
        .zip(likelihoods)
        .map(|(w, l)| if *w > 0.0 { w * l } else { 0.0 })
        .sum();
    if !(total > 0.0) {
        return None;
    }
    for (w, l) in weights.iter_mut().zip(likelihoods) {
        if *w > 0.0 {
            *w = *w * l / total;
            if *w < WEIGHT_FLOOR {
                *w = 0.0;
            }
        }
    }
    Some(total)
}

fn check_prior(prior: &[f64]) -> Result<()> {
    if prior.iter().any(|w| !(*w > 0.0)) {
        return Err(GrlError::InvalidArgument(
            "prior weights must be positive".into(),
        ));
    }
    let s: f64 = prior.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(GrlError::InvalidArgument(format!(
            "prior weights sum to {s}, not 1"
        )));
    }
    Ok(())
}

/// A finite class with prior, incrementally updated posterior and per-member cursors.
pub struct BeliefState {
    members: Arc<[EnvRef]>,
    names: Arc<[String]>,
    prior: Arc<[f64]>,
    posterior: Vec<f64>,
    log_lik: Vec<f64>,
    history: History,
    cursors: Vec<Box<dyn Cursor>>,
}

impl Clone for BeliefState {
    fn clone(&self) -> Self {
        Self {
            members: self.members.clone(),
            names: self.names.clone(),
            prior: self.prior.clone(),
            posterior: self.posterior.clone(),
            log_lik: self.log_lik.clone(),
            history: self.history.clone(),
            cursors: self.cursors.iter().map(|c| c.fork()).collect(),
        }
    }
}

impl Debug for BeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeliefState")
            .field("names", &self.names)
            .field("posterior", &self.posterior)
            .field("t", &self.history.t())
            .finish()
    }
}

impl BeliefState {
    /// Members must share action and percept spaces; the prior must be positive and sum to 1.
    pub fn new(members: Vec<EnvRef>, prior: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(GrlError::InvalidArgument("empty environment class".into()));
        }
        if members.len() != prior.len() {
            return Err(GrlError::InvalidArgument(format!(
                "{} members but {} prior weights",
                members.len(),
                prior.len()
            )));
        }
        check_prior(&prior)?;
        let first = &members[0];
        for m in &members[1..] {
            if m.actions() != first.actions() || m.percepts() != first.percepts() {
                return Err(GrlError::InvalidArgument(format!(
                    "class member `{}` does not share the action/percept spaces of `{}`",
                    m.name(),
                    first.name()
                )));
            }
        }
        let names: Vec<String> = members.iter().map(|m| m.name().to_string()).collect();
        let cursors = members.iter().map(|m| m.clone().cursor()).collect();
        Ok(Self {
            log_lik: vec![0.0; members.len()],
            posterior: prior.clone(),
            members: members.into(),
            names: names.into(),
            prior: prior.into(),
            history: History::new(),
            cursors,
        })
    }

    pub fn uniform(members: Vec<EnvRef>) -> Result<Self> {
        let n = members.len().max(1);
        Self::new(members, vec![1.0 / n as f64; n])
    }

    /// Replaces member names (e.g. to make them unique for reporting).
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.members.len() {
            return Err(GrlError::InvalidArgument("one name per member".into()));
        }
        self.names = names.into();
        Ok(self)
    }

    pub fn members(&self) -> &[EnvRef] {
        &self.members
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }

    /// Natural-log likelihood of the history under each member.
    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_lik
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn t(&self) -> usize {
        self.history.t()
    }

    pub fn actions(&self) -> &ActionSpace {
        self.members[0].actions()
    }

    pub fn percepts(&self) -> &PerceptSpace {
        self.members[0].percepts()
    }

    /// Cursor of member `i` at the current history (advanced even if the member is falsified).
    pub fn member_cursor(&self, i: usize) -> Box<dyn Cursor> {
        self.cursors[i].fork()
    }

    /// Posterior entropy in bits.
    pub fn posterior_entropy(&self) -> f64 {
        entropy(&self.posterior)
    }

    /// The mixture ξ at the current history and posterior.
    pub fn mixture_cursor(&self) -> MixtureCursor {
        MixtureCursor {
            cursors: self
                .cursors
                .iter()
                .zip(&self.posterior)
                .map(|(c, &w)| (w > 0.0).then(|| c.fork()))
                .collect(),
            weights: self.posterior.clone(),
            t: self.history.t(),
            n_percepts: self.percepts().len(),
        }
    }

    /// The mixture environment ξ induced by the prior.
    pub fn mixture_env(&self) -> EnvRef {
        Arc::new(MixtureEnv {
            name: "xi".into(),
            members: self.members.clone(),
            prior: self.prior.clone(),
        })
    }

    /// Persistent update: returns the belief after observing `e` in response to `a`.
    pub fn update_posterior(&self, a: Action, e: PerceptId) -> Result<Self> {
        let mut next = self.clone();
        next.update(a, e)?;
        Ok(next)
    }

    /// In-place Bayes update. Fails, leaving the belief unchanged, if the mixture gives `e` probability 0.
    pub fn update(&mut self, a: Action, e: PerceptId) -> Result<()> {
        let mut buf = vec![0.0; self.percepts().len()];
        let mut lik = vec![0.0; self.members.len()];
        for (i, c) in self.cursors.iter().enumerate() {
            c.fill(a, &mut buf)?;
            check_distribution(self.members[i].name(), &buf)?;
            lik[i] = buf[e.0];
        }
        let mut post = self.posterior.clone();
        if bayes_update(&mut post, &lik).is_none() {
            return Err(GrlError::Unrealizable { t: self.t() });
        }
        self.posterior = post;
        for (ll, l) in self.log_lik.iter_mut().zip(&lik) {
            *ll += l.ln();
        }
        for c in &mut self.cursors {
            c.advance(a, e);
        }
        self.history.push(a, e);
        Ok(())
    }
}

#[derive(Debug)]
struct MixtureEnv {
    name: String,
    members: Arc<[EnvRef]>,
    prior: Arc<[f64]>,
}

impl Environment for MixtureEnv {
    fn name(&self) -> &str {
        &self.name
    }
    fn actions(&self) -> &ActionSpace {
        self.members[0].actions()
    }
    fn percepts(&self) -> &PerceptSpace {
        self.members[0].percepts()
    }
    fn cursor(self: Arc<Self>) -> Box<dyn Cursor> {
        Box::new(MixtureCursor {
            cursors: self.members.iter().map(|m| Some(m.clone().cursor())).collect(),
            weights: self.prior.to_vec(),
            t: 1,
            n_percepts: self.percepts().len(),
        })
    }
    fn is_measure(&self) -> bool {
        self.members.iter().all(|m| m.is_measure())
    }
}

/// Cursor of ξ: posterior weights plus the cursors of members with positive weight.
pub struct MixtureCursor {
    cursors: Vec<Option<Box<dyn Cursor>>>,
    weights: Vec<f64>,
    t: usize,
    n_percepts: usize,
}

impl MixtureCursor {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }

    pub fn fork_mixture(&self) -> MixtureCursor {
        MixtureCursor {
            cursors: self
                .cursors
                .iter()
                .map(|c| c.as_ref().map(|c| c.fork()))
                .collect(),
            weights: self.weights.clone(),
            t: self.t,
            n_percepts: self.n_percepts,
        }
    }

    /// Likelihood of `e` after `a` under each live member (0 for dead ones).
    fn member_likelihoods(&self, a: Action, e: PerceptId) -> Vec<f64> {
        let mut buf = vec![0.0; self.n_percepts];
        self.cursors
            .iter()
            .map(|c| match c {
                Some(c) if c.fill(a, &mut buf).is_ok() => buf[e.0],
                _ => 0.0,
            })
            .collect()
    }
}

impl Cursor for MixtureCursor {
    fn t(&self) -> usize {
        self.t
    }
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (c, &w) in self.cursors.iter().zip(&self.weights) {
            if let (Some(c), true) = (c, w > 0.0) {
                c.fill(a, &mut buf)?;
                for (o, p) in out.iter_mut().zip(&buf) {
                    *o += w * p;
                }
            }
        }
        Ok(())
    }
    fn advance(&mut self, a: Action, e: PerceptId) {
        let lik = self.member_likelihoods(a, e);
        if bayes_update(&mut self.weights, &lik).is_none() {
            // Impossible percept: the mixture has no mass left here.
            self.weights.fill(0.0);
        }
        for (c, &w) in self.cursors.iter_mut().zip(&self.weights) {
            if w > 0.0 {
                if let Some(c) = c {
                    c.advance(a, e);
                }
            } else {
                *c = None;
            }
        }
        self.t += 1;
    }
    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(self.fork_mixture())
    }
    fn key(&self) -> Option<StateKey> {
        let mut key = Vec::with_capacity(self.weights.len() * 3);
        for (c, &w) in self.cursors.iter().zip(&self.weights) {
            match c {
                Some(c) if w > 0.0 => {
                    let k = c.key()?;
                    key.push(w.to_bits());
                    key.push(k.len() as u64);
                    key.extend(k);
                }
                _ => key.push(u64::MAX),
            }
        }
        Some(key)
    }
}

/// Wraps ν so that it mimics ν while the agent follows `policy` and emits the
/// zero-reward percept forever from the first off-policy action on.
#[derive(Debug)]
pub struct DogmaticWrapper {
    name: String,
    inner: EnvRef,
    policy: PolicyRef,
    zero: PerceptId,
}

impl Environment for DogmaticWrapper {
    fn name(&self) -> &str {
        &self.name
    }
    fn actions(&self) -> &ActionSpace {
        self.inner.actions()
    }
    fn percepts(&self) -> &PerceptSpace {
        self.inner.percepts()
    }
    fn cursor(self: Arc<Self>) -> Box<dyn Cursor> {
        let inner = self.inner.clone().cursor();
        Box::new(DogmaticCursor {
            env: self,
            inner,
            history: History::new(),
            deviated: false,
        })
    }
    fn is_measure(&self) -> bool {
        self.inner.is_measure()
    }
}

struct DogmaticCursor {
    env: Arc<DogmaticWrapper>,
    inner: Box<dyn Cursor>,
    history: History,
    deviated: bool,
}

impl DogmaticCursor {
    fn off_policy(&self, a: Action) -> Result<bool> {
        Ok(self.deviated || self.env.policy.action_distribution(&self.history)?[a.0] < 1.0)
    }
}

impl Cursor for DogmaticCursor {
    fn t(&self) -> usize {
        self.history.t()
    }
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        if self.off_policy(a)? {
            out.fill(0.0);
            out[self.env.zero.0] = 1.0;
            Ok(())
        } else {
            self.inner.fill(a, out)
        }
    }
    fn advance(&mut self, a: Action, e: PerceptId) {
        if !self.deviated {
            if self.off_policy(a).unwrap_or(true) {
                self.deviated = true;
            } else {
                self.inner.advance(a, e);
            }
        }
        self.history.push(a, e);
    }
    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(DogmaticCursor {
            env: self.env.clone(),
            inner: self.inner.fork(),
            history: self.history.clone(),
            deviated: self.deviated,
        })
    }
    fn key(&self) -> Option<StateKey> {
        if self.deviated {
            return Some(vec![1]);
        }
        let inner = self.inner.key()?;
        let pol = self.env.policy.memo_key(&self.history)?;
        let mut k = vec![0, inner.len() as u64];
        k.extend(inner);
        k.extend(pol);
        Some(k)
    }
}

fn is_dyadic(x: f64) -> bool {
    (x * 2f64.powi(52)).fract() == 0.0
}

/// Extends the class with a dogmatic wrapper ρ_ν per member ν, with weights
/// w′(ν) = ε·w(ν) and w′(ρ_ν) = (1−ε)·w(ν), ordered ν₁, ρ_ν₁, ν₂, ρ_ν₂, ...
pub fn dogmatic_prior(b: &BeliefState, policy: PolicyRef, eps: f64) -> Result<BeliefState> {
    if !(eps > 0.0 && eps < 1.0) || !is_dyadic(eps) {
        return Err(GrlError::InvalidArgument(format!(
            "dogmatic eps must be a dyadic rational in (0,1), got {eps}"
        )));
    }
    let zero = b.percepts().zero_reward().ok_or_else(|| {
        GrlError::InvalidArgument("the percept space has no zero-reward percept".into())
    })?;
    let mut members: Vec<EnvRef> = Vec::new();
    let mut prior = Vec::new();
    let mut names = Vec::new();
    for ((m, &w), name) in b.members().iter().zip(b.prior()).zip(b.names()) {
        members.push(m.clone());
        prior.push(eps * w);
        names.push(name.clone());
        let rho = Arc::new(DogmaticWrapper {
            name: format!("dogmatic_{name}"),
            inner: m.clone(),
            policy: policy.clone(),
            zero,
        });
        names.push(rho.name.clone());
        members.push(rho);
        prior.push((1.0 - eps) * w);
    }
    BeliefState::new(members, prior)?.with_names(names)
}
