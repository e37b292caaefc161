//! Policies: maps from histories to action distributions.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::StateKey;
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::space::{Action, ActionSpace};

pub trait Policy: Send + Sync + Debug {
    fn num_actions(&self) -> usize;

    /// Probability of each action after history `h`.
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>>;

    /// Summary of everything the policy's behaviour from `h` onward depends on.
    /// Returning `Some` lets the planner memoize subtrees across histories.
    fn memo_key(&self, _h: &History) -> Option<StateKey> {
        None
    }

    /// The action if the policy is deterministic at `h`.
    fn deterministic_action(&self, h: &History) -> Result<Option<Action>> {
        let d = self.action_distribution(h)?;
        Ok(d.iter().position(|&p| p == 1.0).map(Action))
    }
}

pub type PolicyRef = Arc<dyn Policy>;

pub fn one_hot(n: usize, a: Action) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a.0] = 1.0;
    v
}

#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    pub action: Action,
    pub n: usize,
}

impl Policy for ConstantPolicy {
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, _h: &History) -> Result<Vec<f64>> {
        Ok(one_hot(self.n, self.action))
    }
    fn memo_key(&self, _h: &History) -> Option<StateKey> {
        Some(Vec::new())
    }
}

/// Plays `actions[(t−1) mod len]`.
#[derive(Debug, Clone)]
pub struct CyclePolicy {
    pub actions: Vec<Action>,
    pub n: usize,
}

impl Policy for CyclePolicy {
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        Ok(one_hot(self.n, self.actions[h.len() % self.actions.len()]))
    }
    fn memo_key(&self, h: &History) -> Option<StateKey> {
        Some(vec![(h.len() % self.actions.len()) as u64])
    }
}

/// Open-loop action sequence indexed by time; the last action repeats.
#[derive(Debug, Clone)]
pub struct SequencePolicy {
    pub actions: Vec<Action>,
    pub n: usize,
}

impl Policy for SequencePolicy {
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        let i = h.len().min(self.actions.len() - 1);
        Ok(one_hot(self.n, self.actions[i]))
    }
    fn memo_key(&self, h: &History) -> Option<StateKey> {
        Some(vec![h.len().min(self.actions.len() - 1) as u64])
    }
}

#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub n: usize,
}

impl Policy for UniformPolicy {
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, _h: &History) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.n as f64; self.n])
    }
    fn memo_key(&self, _h: &History) -> Option<StateKey> {
        Some(Vec::new())
    }
}

/// A policy defined by a closure.
pub struct FnPolicy<F> {
    pub n: usize,
    pub f: F,
}

impl<F> Debug for FnPolicy<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FnPolicy({} actions)", self.n)
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&History) -> Vec<f64> + Send + Sync,
{
    fn num_actions(&self) -> usize {
        self.n
    }
    fn action_distribution(&self, h: &History) -> Result<Vec<f64>> {
        let d = (self.f)(h);
        if d.len() != self.n {
            return Err(GrlError::InvalidArgument(format!(
                "policy returned {} probabilities for {} actions",
                d.len(),
                self.n
            )));
        }
        Ok(d)
    }
}

/// Serializable description of a fixed policy, resolved against an action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Constant { action: String },
    Cycle { actions: Vec<String> },
    Sequence { actions: Vec<String> },
    Uniform,
}

impl PolicySpec {
    pub fn build(&self, space: &ActionSpace) -> Result<PolicyRef> {
        let resolve = |name: &str| {
            space
                .parse(name)
                .ok_or_else(|| GrlError::InvalidArgument(format!("unknown action `{name}`")))
        };
        let resolve_all = |names: &[String]| -> Result<Vec<Action>> {
            if names.is_empty() {
                return Err(GrlError::InvalidArgument("empty action list".into()));
            }
            names.iter().map(|n| resolve(n)).collect()
        };
        let n = space.len();
        Ok(match self {
            PolicySpec::Constant { action } => Arc::new(ConstantPolicy {
                action: resolve(action)?,
                n,
            }),
            PolicySpec::Cycle { actions } => Arc::new(CyclePolicy {
                actions: resolve_all(actions)?,
                n,
            }),
            PolicySpec::Sequence { actions } => Arc::new(SequencePolicy {
                actions: resolve_all(actions)?,
                n,
            }),
            PolicySpec::Uniform => Arc::new(UniformPolicy { n }),
        })
    }
}
