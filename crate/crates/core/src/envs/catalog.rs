//! Environments used in experiments and counterexamples.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Cursor, EnvRef, Environment, StateKey};
use crate::discount::DiscountSchedule;
use crate::error::{GrlError, Result};
use crate::history::History;
use crate::policy::{PolicyRef, PolicySpec};
use crate::space::{Action, ActionSpace, PerceptId, PerceptSpace};

fn default_bandit_epsilon() -> f64 {
    0.01
}

/// Serializable catalog descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    /// α leads to hell (reward 0 forever), β to heaven (reward 1 forever); `mirrored` swaps them.
    HeavenHell {
        #[serde(default)]
        mirrored: bool,
    },
    /// β in s₀ pays ½; α enters a zero-reward chain of length H_t(1/t).
    /// With `unlock = k`, α in s₀ at any t > k pays 1 and stays in s₀.
    Orseau {
        #[serde(default)]
        unlock: Option<usize>,
    },
    /// Five-state environment in which the path s₀ → s₃ → s₄ (reward 1 loop) opens at t ≥ `unlock`.
    TsTrap {
        #[serde(default)]
        unlock: Option<usize>,
    },
    /// Member `index` of the (arms+1)-armed bandit family: arm 1 pays 1 − ε,
    /// arm `index + 1` pays 1, the rest pay 0.
    Bandit {
        arms: usize,
        index: usize,
        #[serde(default = "default_bandit_epsilon")]
        epsilon: f64,
    },
    /// α pays 1 and then halts; β pays ε and then 0 forever.
    Separator { epsilon: f64 },
    /// i.i.d. reward 1 with probability `probs[a]`, else 0.
    Bernoulli { probs: Vec<f64> },
    /// Members of the two-environment class used to compare entropy- and information-seeking.
    KsaExample { variant: u8 },
    /// Reward 0 while the agent follows `policy`, reward 1 from its first deviation on.
    AdversarialToPolicy { policy: PolicySpec },
}

impl EnvSpec {
    pub fn default_name(&self) -> String {
        match self {
            EnvSpec::HeavenHell { mirrored } => {
                if *mirrored {
                    "heaven_hell_mirrored".into()
                } else {
                    "heaven_hell".into()
                }
            }
            EnvSpec::Orseau { unlock } => match unlock {
                Some(k) => format!("orseau_{k}"),
                None => "orseau_inf".into(),
            },
            EnvSpec::TsTrap { unlock } => match unlock {
                Some(k) => format!("ts_trap_{k}"),
                None => "ts_trap_inf".into(),
            },
            EnvSpec::Bandit { arms, index, .. } => format!("bandit_{arms}_{index}"),
            EnvSpec::Separator { .. } => "separator".into(),
            EnvSpec::Bernoulli { probs } => {
                let ps: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                format!("bernoulli_{}", ps.join("_"))
            }
            EnvSpec::KsaExample { variant } => format!("ksa_{variant}"),
            EnvSpec::AdversarialToPolicy { .. } => "adversarial".into(),
        }
    }
}

fn bad(msg: impl Into<String>) -> GrlError {
    GrlError::BadCatalogSpec(msg.into())
}

/// Builds a catalog environment. The schedule is only used by the Orseau family.
pub fn make_env(spec: &EnvSpec, sched: &DiscountSchedule) -> Result<EnvRef> {
    let name = spec.default_name();
    let two = || ActionSpace::numbered(2).expect("two actions");
    let binary = || PerceptSpace::rewards(&[("0", 0.0), ("1", 1.0)]).expect("valid");
    let thirds = || PerceptSpace::rewards(&[("0", 0.0), ("1/2", 0.5), ("1", 1.0)]).expect("valid");
    let env: EnvRef = match spec {
        EnvSpec::HeavenHell { mirrored } => Arc::new(Table {
            name,
            actions: two(),
            percepts: binary(),
            measure: true,
            logic: HeavenHell {
                mirrored: *mirrored,
            },
        }),
        EnvSpec::Orseau { unlock } => {
            if *unlock == Some(0) {
                return Err(bad("orseau unlock time must be at least 1"));
            }
            Arc::new(Table {
                name,
                actions: two(),
                percepts: thirds(),
                measure: true,
                logic: Orseau {
                    unlock: *unlock,
                    sched: sched.clone(),
                },
            })
        }
        EnvSpec::TsTrap { unlock } => {
            if *unlock == Some(0) {
                return Err(bad("ts_trap unlock time must be at least 1"));
            }
            Arc::new(Table {
                name,
                actions: two(),
                percepts: thirds(),
                measure: true,
                logic: TsTrap { unlock: *unlock },
            })
        }
        EnvSpec::Bandit {
            arms,
            index,
            epsilon,
        } => {
            if *arms < 1 || *index < 1 || index > arms {
                return Err(bad(format!(
                    "bandit needs 1 ≤ index ≤ arms, got index={index}, arms={arms}"
                )));
            }
            if !(*epsilon > 0.0 && *epsilon < 1.0) {
                return Err(bad(format!("bandit epsilon must be in (0,1), got {epsilon}")));
            }
            let actions =
                ActionSpace::new((1..=arms + 1).map(|i| format!("arm{i}"))).expect("distinct");
            let percepts =
                PerceptSpace::rewards(&[("0", 0.0), ("1-eps", 1.0 - epsilon), ("1", 1.0)])
                    .expect("valid");
            Arc::new(Table {
                name,
                actions,
                percepts,
                measure: true,
                logic: Bandit { best: *index },
            })
        }
        EnvSpec::Separator { epsilon } => {
            if !(*epsilon > 0.0 && *epsilon < 1.0) {
                return Err(bad(format!("separator epsilon must be in (0,1), got {epsilon}")));
            }
            Arc::new(Table {
                name,
                actions: two(),
                percepts: PerceptSpace::rewards(&[("0", 0.0), ("eps", *epsilon), ("1", 1.0)])
                    .expect("valid"),
                measure: false,
                logic: Separator,
            })
        }
        EnvSpec::Bernoulli { probs } => {
            if probs.len() < 2 {
                return Err(bad("bernoulli needs a probability per action (at least 2)"));
            }
            if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(bad(format!("bernoulli probability {p} outside [0,1]")));
            }
            Arc::new(Table {
                name,
                actions: ActionSpace::numbered(probs.len()).expect("n ≥ 2"),
                percepts: binary(),
                measure: true,
                logic: Bernoulli {
                    probs: probs.clone(),
                },
            })
        }
        EnvSpec::KsaExample { variant } => {
            if !matches!(variant, 1 | 2) {
                return Err(bad(format!("ksa_example variant must be 1 or 2, got {variant}")));
            }
            let percepts = PerceptSpace::new(vec![
                crate::space::Percept {
                    observation: 0,
                    reward: 0.0,
                    label: "0".into(),
                },
                crate::space::Percept {
                    observation: 1,
                    reward: 0.0,
                    label: "1".into(),
                },
            ])
            .expect("valid");
            Arc::new(Table {
                name,
                actions: two(),
                percepts,
                measure: false,
                logic: KsaExample {
                    variant: *variant,
                },
            })
        }
        EnvSpec::AdversarialToPolicy { policy } => {
            let actions = two();
            if matches!(policy, PolicySpec::Uniform) {
                return Err(bad("adversarial_to_policy needs a deterministic policy"));
            }
            let policy = policy.build(&actions).map_err(|e| bad(e.to_string()))?;
            Arc::new(AdversarialToPolicy {
                name,
                actions,
                percepts: binary(),
                policy,
            })
        }
    };
    Ok(env)
}

/// Transition logic of a catalog environment with a small explicit state.
trait Logic: Send + Sync + Debug + 'static {
    type State: Clone + Send + Sync + Default + 'static;
    fn fill(&self, s: &Self::State, t: usize, a: Action, out: &mut [f64]);
    fn step(&self, s: &mut Self::State, t: usize, a: Action, e: PerceptId);
    fn key(&self, s: &Self::State) -> StateKey;
}

#[derive(Debug)]
struct Table<L> {
    name: String,
    actions: ActionSpace,
    percepts: PerceptSpace,
    measure: bool,
    logic: L,
}

impl<L: Logic> Table<L> {
    pub fn logic(&self) -> &L {
        &self.logic
    }
}

impl<L: Logic> Environment for Table<L> {
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
        Box::new(TableCursor {
            env: self,
            t: 1,
            state: L::State::default(),
        })
    }
    fn is_measure(&self) -> bool {
        self.measure
    }
}

struct TableCursor<L: Logic> {
    env: Arc<Table<L>>,
    t: usize,
    state: L::State,
}

impl<L: Logic> Cursor for TableCursor<L> {
    fn t(&self) -> usize {
        self.t
    }
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        self.env.logic().fill(&self.state, self.t, a, out);
        Ok(())
    }
    fn advance(&mut self, a: Action, e: PerceptId) {
        self.env.logic().step(&mut self.state, self.t, a, e);
        self.t += 1;
    }
    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(TableCursor {
            env: self.env.clone(),
            t: self.t,
            state: self.state.clone(),
        })
    }
    fn key(&self) -> Option<StateKey> {
        Some(self.env.logic().key(&self.state))
    }
}

const ALPHA: Action = Action(0);

#[derive(Debug)]
struct HeavenHell {
    mirrored: bool,
}

/// 0 = undecided, 1 = heaven, 2 = hell.
impl Logic for HeavenHell {
    type State = u8;
    fn fill(&self, s: &u8, _t: usize, a: Action, out: &mut [f64]) {
        let heaven = match *s {
            0 => (a == ALPHA) == self.mirrored,
            s => s == 1,
        };
        out[usize::from(heaven)] = 1.0;
    }
    fn step(&self, s: &mut u8, _t: usize, a: Action, _e: PerceptId) {
        if *s == 0 {
            *s = if (a == ALPHA) == self.mirrored { 1 } else { 2 };
        }
    }
    fn key(&self, s: &u8) -> StateKey {
        vec![u64::from(*s)]
    }
}

/// State is the number of chain steps still to go; 0 means s₀.
#[derive(Debug)]
struct Orseau {
    unlock: Option<usize>,
    sched: DiscountSchedule,
}

impl Orseau {
    fn chain_length(&self, t: usize) -> usize {
        self.sched
            .effective_horizon(t, 1.0 / t as f64)
            .map(|h| h.steps)
            .unwrap_or(0)
    }
}

const ZERO: usize = 0;
const HALF: usize = 1;
const ONE: usize = 2;

impl Logic for Orseau {
    type State = usize;
    fn fill(&self, s: &usize, t: usize, a: Action, out: &mut [f64]) {
        let e = if *s > 0 {
            ZERO
        } else if a != ALPHA {
            HALF
        } else if self.unlock.is_some_and(|k| t > k) {
            ONE
        } else {
            ZERO
        };
        out[e] = 1.0;
    }
    fn step(&self, s: &mut usize, t: usize, a: Action, _e: PerceptId) {
        if *s > 0 {
            *s -= 1;
        } else if a == ALPHA && !self.unlock.is_some_and(|k| t > k) {
            *s = self.chain_length(t);
        }
    }
    fn key(&self, s: &usize) -> StateKey {
        vec![*s as u64]
    }
}

#[derive(Debug)]
struct TsTrap {
    unlock: Option<usize>,
}

impl TsTrap {
    /// (reward index, next state)
    fn transition(&self, s: u8, t: usize, a: Action) -> (usize, u8) {
        let alpha = a == ALPHA;
        match (s, alpha) {
            (0, false) => (HALF, 0),
            (0, true) => {
                if self.unlock.is_some_and(|k| t >= k) {
                    (ZERO, 3)
                } else {
                    (ZERO, 1)
                }
            }
            (1, false) => (ZERO, 0),
            (1, true) => (ZERO, 2),
            (2, _) => (ZERO, 0),
            (3, true) => (ZERO, 4),
            (3, false) => (ZERO, 0),
            (4, true) => (ONE, 4),
            (4, false) => (ZERO, 2),
            _ => unreachable!("ts_trap has five states"),
        }
    }
}

impl Logic for TsTrap {
    type State = u8;
    fn fill(&self, s: &u8, t: usize, a: Action, out: &mut [f64]) {
        out[self.transition(*s, t, a).0] = 1.0;
    }
    fn step(&self, s: &mut u8, t: usize, a: Action, _e: PerceptId) {
        *s = self.transition(*s, t, a).1;
    }
    fn key(&self, s: &u8) -> StateKey {
        vec![u64::from(*s)]
    }
}

#[derive(Debug)]
struct Bandit {
    best: usize,
}

impl Logic for Bandit {
    type State = ();
    fn fill(&self, _s: &(), _t: usize, a: Action, out: &mut [f64]) {
        let e = if a.0 == 0 {
            1
        } else if a.0 == self.best {
            2
        } else {
            0
        };
        out[e] = 1.0;
    }
    fn step(&self, _s: &mut (), _t: usize, _a: Action, _e: PerceptId) {}
    fn key(&self, _s: &()) -> StateKey {
        Vec::new()
    }
}

/// 0 = start, 1 = ended, 2 = after β.
#[derive(Debug)]
struct Separator;

impl Logic for Separator {
    type State = u8;
    fn fill(&self, s: &u8, _t: usize, a: Action, out: &mut [f64]) {
        match *s {
            0 if a == ALPHA => out[2] = 1.0,
            0 => out[1] = 1.0,
            2 => out[0] = 1.0,
            _ => {}
        }
    }
    fn step(&self, s: &mut u8, _t: usize, a: Action, _e: PerceptId) {
        if *s == 0 {
            *s = if a == ALPHA { 1 } else { 2 };
        }
    }
    fn key(&self, s: &u8) -> StateKey {
        vec![u64::from(*s)]
    }
}

#[derive(Debug)]
struct Bernoulli {
    probs: Vec<f64>,
}

impl Logic for Bernoulli {
    type State = ();
    fn fill(&self, _s: &(), _t: usize, a: Action, out: &mut [f64]) {
        let p = self.probs[a.0];
        out[0] = 1.0 - p;
        out[1] = p;
    }
    fn step(&self, _s: &mut (), _t: usize, _a: Action, _e: PerceptId) {}
    fn key(&self, _s: &()) -> StateKey {
        Vec::new()
    }
}

/// α: percept `variant − 1` with probability 0.1; β: percept 0 with probability 0.5.
/// The remaining mass halts.
#[derive(Debug)]
struct KsaExample {
    variant: u8,
}

impl Logic for KsaExample {
    type State = ();
    fn fill(&self, _s: &(), _t: usize, a: Action, out: &mut [f64]) {
        if a == ALPHA {
            out[usize::from(self.variant - 1)] = 0.1;
        } else {
            out[0] = 0.5;
        }
    }
    fn step(&self, _s: &mut (), _t: usize, _a: Action, _e: PerceptId) {}
    fn key(&self, _s: &()) -> StateKey {
        Vec::new()
    }
}

#[derive(Debug)]
struct AdversarialToPolicy {
    name: String,
    actions: ActionSpace,
    percepts: PerceptSpace,
    policy: PolicyRef,
}

impl Environment for AdversarialToPolicy {
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
        Box::new(AdversarialCursor {
            env: self,
            history: History::new(),
            deviated: false,
        })
    }
}

#[derive(Clone)]
struct AdversarialCursor {
    env: Arc<AdversarialToPolicy>,
    history: History,
    deviated: bool,
}

impl AdversarialCursor {
    fn deviates(&self, a: Action) -> Result<bool> {
        if self.deviated {
            return Ok(true);
        }
        let d = self.env.policy.action_distribution(&self.history)?;
        Ok(d[a.0] < 1.0)
    }
}

impl Cursor for AdversarialCursor {
    fn t(&self) -> usize {
        self.history.t()
    }
    fn fill(&self, a: Action, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        out[usize::from(self.deviates(a)?)] = 1.0;
        Ok(())
    }
    fn advance(&mut self, a: Action, e: PerceptId) {
        self.deviated = self.deviates(a).unwrap_or(true);
        self.history.push(a, e);
    }
    fn fork(&self) -> Box<dyn Cursor> {
        Box::new(self.clone())
    }
    fn key(&self) -> Option<StateKey> {
        if self.deviated {
            return Some(vec![1]);
        }
        let mut k = self.env.policy.memo_key(&self.history)?;
        k.insert(0, 0);
        Some(k)
    }
}

/// Position in the Orseau chain after `h` (0 means s₀), by replaying the transition logic.
pub fn orseau_position(unlock: Option<usize>, sched: &DiscountSchedule, h: &History) -> usize {
    let logic = Orseau {
        unlock,
        sched: sched.clone(),
    };
    let mut s = 0;
    for (i, &(a, e)) in h.cycles().iter().enumerate() {
        logic.step(&mut s, i + 1, a, e);
    }
    s
}

/// Names of all catalog kinds with a short description, for `grl list-envs`.
pub fn catalog_listing() -> Vec<(&'static str, &'static str)> {
    vec![
        ("heaven_hell", "mirrored=bool: α → hell (0 forever), β → heaven (1 forever)"),
        ("orseau", "unlock=k: β pays 1/2, α enters a zero chain of length H_t(1/t); after k, α pays 1"),
        ("ts_trap", "unlock=k: five-state trap; s0 → s3 → s4 (reward-1 loop) opens at t ≥ k"),
        ("bandit", "arms=n, index=i, epsilon: arm1 pays 1−ε, arm i+1 pays 1, others 0"),
        ("separator", "epsilon: α pays 1 then halts; β pays ε then 0 forever"),
        ("bernoulli", "probs=[p_a...]: i.i.d. reward 1 with probability p_a"),
        ("ksa_example", "variant=1|2: α yields percept variant−1 w.p. 0.1, β percept 0 w.p. 0.5"),
        ("adversarial_to_policy", "policy={kind=...}: reward 0 on-policy, 1 after the first deviation"),
    ]
}
