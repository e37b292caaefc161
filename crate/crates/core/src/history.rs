use serde::{Deserialize, Serialize};

use crate::space::{Action, PerceptId, PerceptSpace};

/// Append-only sequence of interaction cycles. A history of `n` cycles sits at time `t = n + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct History {
    cycles: Vec<(Action, PerceptId)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cycles(cycles: Vec<(Action, PerceptId)>) -> Self {
        Self { cycles }
    }

    /// The current time step.
    pub fn t(&self) -> usize {
        self.cycles.len() + 1
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn push(&mut self, a: Action, e: PerceptId) {
        self.cycles.push((a, e));
    }

    pub(crate) fn pop(&mut self) -> Option<(Action, PerceptId)> {
        self.cycles.pop()
    }

    pub fn cycles(&self) -> &[(Action, PerceptId)] {
        &self.cycles
    }

    /// Cycle at time step `k` (1-based).
    pub fn at(&self, k: usize) -> (Action, PerceptId) {
        self.cycles[k - 1]
    }

    pub fn last(&self) -> Option<(Action, PerceptId)> {
        self.cycles.last().copied()
    }

    /// The history up to (excluding) time step `t`.
    pub fn prefix(&self, t: usize) -> History {
        History {
            cycles: self.cycles[..t - 1].to_vec(),
        }
    }

    pub fn extended(&self, a: Action, e: PerceptId) -> History {
        let mut h = self.clone();
        h.push(a, e);
        h
    }

    pub fn starts_with(&self, other: &History) -> bool {
        self.cycles.starts_with(&other.cycles)
    }

    pub fn rewards<'a>(&'a self, space: &'a PerceptSpace) -> impl Iterator<Item = f64> + 'a {
        self.cycles.iter().map(|(_, e)| space.reward(*e))
    }
}
