//! Experiment configuration: strict TOML with `[experiment]`, `[discount]`, `[class]`, `[[agents]]` and `[output]`.

use std::path::PathBuf;

use grl_core::envs::make_env;
use grl_core::multiagent::GameSpec;
use grl_core::planner::{DEFAULT_DEPTH_CAP, DEPTH_CAP_ENV};
use grl_core::prediction::PredictorSpec;
use grl_core::{AgentSpec, BeliefState, DiscountKind, DiscountSchedule, EnvRef, EnvSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SingleAgent,
    Prediction,
    Multiagent,
    Values,
}

/// An explicit seed list, or a count `n` meaning seeds 1..=n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Count(u64),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::List(vec![1])
    }
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Count(n) => (1..=*n).collect(),
        }
    }
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: Kind,
    pub name: String,
    #[serde(default)]
    pub steps: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Threshold for value gaps, best-response indicators and effective horizons.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    /// Lookahead m − t used for checkpoint gaps; defaults to H_t(eps) limited by the depth cap.
    #[serde(default)]
    pub gap_depth: Option<usize>,
    #[serde(default)]
    pub depth_cap: Option<usize>,
    /// Exact undiscounted regret of each agent over this many steps, reported in the summary.
    #[serde(default)]
    pub regret_horizon: Option<usize>,
    /// Horizon of the prior-weighted intelligence of each agent, reported in the summary.
    #[serde(default)]
    pub upsilon_horizon: Option<usize>,
    /// The true environment (single_agent, values). Defaults to the class member `class.truth`.
    #[serde(default)]
    pub environment: Option<EnvSpec>,
    #[serde(default)]
    pub game: Option<GameSpec>,
    /// Sequence source (prediction).
    #[serde(default)]
    pub truth: Option<PredictorSpec>,
    #[serde(default)]
    pub predictors: Vec<PredictorSpec>,
    /// History literal (values).
    #[serde(default)]
    pub history: Option<String>,
    /// Absolute horizon m (values).
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub iterative: bool,
}

impl Experiment {
    /// An experiment with every optional key unset.
    pub fn new(kind: Kind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            steps: 0,
            seeds: Seeds::default(),
            eps: default_eps(),
            checkpoint_every: None,
            gap_depth: None,
            depth_cap: None,
            regret_horizon: None,
            upsilon_horizon: None,
            environment: None,
            game: None,
            truth: None,
            predictors: Vec::new(),
            history: None,
            horizon: None,
            iterative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub members: Vec<EnvSpec>,
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    #[serde(default)]
    pub truth: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

fn default_discount() -> DiscountKind {
    DiscountKind::Geometric { gamma: 0.9 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default = "default_discount")]
    pub discount: DiscountKind,
    #[serde(default)]
    pub class: Option<ClassConfig>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: Config = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: toml::Value) -> Result<Self, RunError> {
        let cfg: Config = v.try_into().map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// A config with defaults for everything but the experiment.
    pub fn with_experiment(experiment: Experiment) -> Result<Self, RunError> {
        let cfg = Self {
            experiment,
            discount: default_discount(),
            class: None,
            agents: Vec::new(),
            output: OutputConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), RunError> {
        let e = &self.experiment;
        let bad = |msg: String| Err(RunError::Config(msg));
        if e.name.is_empty() || e.name.contains(['/', '\\']) {
            return bad(format!("experiment.name `{}` must be a non-empty file stem", e.name));
        }
        if !(e.eps > 0.0) {
            return bad(format!("experiment.eps must be positive, got {}", e.eps));
        }
        if e.seeds.resolve().is_empty() {
            return bad("experiment.seeds is empty".into());
        }
        if e.checkpoint_every == Some(0) {
            return bad("experiment.checkpoint_every must be at least 1".into());
        }
        self.schedule()?;
        match e.kind {
            Kind::SingleAgent => {
                if e.steps == 0 {
                    return bad("single_agent needs experiment.steps ≥ 1".into());
                }
                if self.agents.is_empty() {
                    return bad("single_agent needs at least one [[agents]] entry".into());
                }
                self.true_env_spec()?;
            }
            Kind::Prediction => {
                if e.steps == 0 {
                    return bad("prediction needs experiment.steps ≥ 1".into());
                }
                if e.truth.is_none() || e.predictors.is_empty() {
                    return bad("prediction needs experiment.truth and experiment.predictors".into());
                }
            }
            Kind::Multiagent => {
                if e.steps == 0 {
                    return bad("multiagent needs experiment.steps ≥ 1".into());
                }
                let Some(game) = e.game else {
                    return bad("multiagent needs experiment.game".into());
                };
                let n = game.build().n_agents();
                if self.agents.len() != n {
                    return bad(format!("game needs {n} [[agents]] entries, got {}", self.agents.len()));
                }
            }
            Kind::Values => {
                if e.horizon.is_none() {
                    return bad("values needs experiment.horizon".into());
                }
                self.true_env_spec()?;
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<DiscountSchedule, RunError> {
        DiscountSchedule::new(self.discount).map_err(|e| RunError::Config(format!("discount: {e}")))
    }

    /// `GRL_DEPTH_CAP` if set, else `experiment.depth_cap`, else the planner default.
    pub fn depth_cap(&self) -> usize {
        std::env::var(DEPTH_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .or(self.experiment.depth_cap)
            .unwrap_or(DEFAULT_DEPTH_CAP)
    }

    pub fn true_env_spec(&self) -> Result<EnvSpec, RunError> {
        if let Some(spec) = &self.experiment.environment {
            return Ok(spec.clone());
        }
        let class = self.class.as_ref().ok_or_else(|| {
            RunError::Config("need experiment.environment or a [class] with a truth member".into())
        })?;
        let i = class.truth.unwrap_or(0);
        class.members.get(i).cloned().ok_or_else(|| {
            RunError::Config(format!("class.truth = {i} but the class has {} members", class.members.len()))
        })
    }

    /// The prior belief over `[class]`, if present.
    pub fn belief(&self, sched: &DiscountSchedule) -> Result<Option<BeliefState>, RunError> {
        let Some(class) = &self.class else {
            return Ok(None);
        };
        let cfg = |e: grl_core::GrlError| RunError::Config(format!("class: {e}"));
        let members: Vec<EnvRef> = class
            .members
            .iter()
            .map(|s| make_env(s, sched))
            .collect::<Result<_, _>>()
            .map_err(cfg)?;
        let mut names: Vec<String> = class.members.iter().map(EnvSpec::default_name).collect();
        dedupe(&mut names);
        let b = match &class.prior {
            Some(p) => BeliefState::new(members, p.clone()),
            None => BeliefState::uniform(members),
        }
        .and_then(|b| b.with_names(names))
        .map_err(cfg)?;
        Ok(Some(b))
    }
}

/// Appends `_2`, `_3`, ... to repeated names.
pub fn dedupe(names: &mut [String]) {
    let original = names.to_vec();
    for (i, name) in names.iter_mut().enumerate() {
        let count = original[..i].iter().filter(|n| **n == original[i]).count();
        if count > 0 {
            *name = format!("{}_{}", original[i], count + 1);
        }
    }
}
