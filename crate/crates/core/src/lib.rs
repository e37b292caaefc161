//! A desk-scale laboratory for general (history-based) reinforcement learning.
//!
//! Environments are conditional sub-distributions over percepts given the full
//! history; agents are Bayesian over finite environment classes and plan by
//! exact finite-horizon expectimax.

// `!(x > 0.0)` is how NaN is rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod discount;
pub mod envs;
pub mod error;
pub mod history;
pub mod info;
pub mod metrics;
pub mod mixture;
pub mod multiagent;
pub mod planner;
pub mod policy;
pub mod prediction;
pub mod rng;
pub mod space;

pub use agents::{Agent, AgentSpec, EpsSchedule, Planning};
pub use discount::{DiscountKind, DiscountSchedule, EffectiveHorizon};
pub use envs::{Cursor, EnvRef, EnvSpec, Environment, EpisodeState, StepOutcome};
pub use error::{GrlError, Result};
pub use history::History;
pub use mixture::BeliefState;
pub use planner::{PlanQuery, ValueReport};
pub use policy::{Policy, PolicyRef, PolicySpec};
pub use rng::RngStream;
pub use space::{Action, ActionSpace, Percept, PerceptId, PerceptSpace};
