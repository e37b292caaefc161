//! Action and percept alphabets.

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};

/// Index into an [`ActionSpace`]. Lower indices come first in the tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action(pub usize);

/// Index into a [`PerceptSpace`]. Percepts are compared by index only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerceptId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    names: Vec<String>,
}

impl ActionSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(GrlError::InvalidArgument(
                "an action space needs at least two actions".into(),
            ));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(GrlError::InvalidArgument(format!("duplicate action `{n}`")));
            }
        }
        Ok(Self { names })
    }

    /// `alpha`, `beta`, then `a2`, `a3`, ...
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| match i {
            0 => "alpha".to_string(),
            1 => "beta".to_string(),
            _ => format!("a{i}"),
        }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, a: Action) -> &str {
        &self.names[a.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> {
        (0..self.names.len()).map(Action)
    }

    pub fn parse(&self, name: &str) -> Option<Action> {
        let name = match name {
            "α" => "alpha",
            "β" => "beta",
            other => other,
        };
        self.names.iter().position(|n| n == name).map(Action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub observation: u32,
    pub reward: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptSpace {
    percepts: Vec<Percept>,
}

impl PerceptSpace {
    pub fn new(percepts: Vec<Percept>) -> Result<Self> {
        if percepts.is_empty() {
            return Err(GrlError::InvalidArgument("empty percept space".into()));
        }
        for (i, p) in percepts.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.reward) {
                return Err(GrlError::InvalidArgument(format!(
                    "percept `{}` has reward {} outside [0, 1]",
                    p.label, p.reward
                )));
            }
            if percepts[..i].iter().any(|q| q.label == p.label) {
                return Err(GrlError::InvalidArgument(format!(
                    "duplicate percept label `{}`",
                    p.label
                )));
            }
        }
        Ok(Self { percepts })
    }

    /// Vacuous observation, one percept per reward, labelled by the given strings.
    pub fn rewards(labelled: &[(&str, f64)]) -> Result<Self> {
        Self::new(
            labelled
                .iter()
                .map(|(l, r)| Percept {
                    observation: 0,
                    reward: *r,
                    label: (*l).to_string(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.percepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.percepts.is_empty()
    }

    pub fn get(&self, e: PerceptId) -> &Percept {
        &self.percepts[e.0]
    }

    pub fn reward(&self, e: PerceptId) -> f64 {
        self.percepts[e.0].reward
    }

    pub fn iter(&self) -> impl Iterator<Item = PerceptId> {
        (0..self.percepts.len()).map(PerceptId)
    }

    pub fn parse(&self, label: &str) -> Option<PerceptId> {
        self.percepts
            .iter()
            .position(|p| p.label == label)
            .map(PerceptId)
    }

    /// First percept in the list whose reward is exactly zero.
    pub fn zero_reward(&self) -> Option<PerceptId> {
        self.percepts
            .iter()
            .position(|p| p.reward == 0.0)
            .map(PerceptId)
    }
}
