//! Online sequence prediction: predictors, maximum-likelihood prediction, error ledgers and divergences.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::info::{entropy, kl_divergence, total_variation};
use crate::mixture::bayes_update;
use crate::rng::RngStream;

/// Default cap on the number of symbols enumerated by [`divergences`].
pub const DIVERGENCE_CAP: usize = 12;

pub trait Predictor: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn alphabet(&self) -> usize;
    /// Incremental state at the empty string.
    fn start(&self) -> Box<dyn PredictorState>;

    /// Next-symbol distribution after `x`.
    fn conditional(&self, x: &[usize]) -> Result<Vec<f64>> {
        let mut s = self.start();
        for &sym in x {
            s.update(sym)?;
        }
        Ok(s.conditional())
    }

    /// Probability of the string `x`.
    fn string_probability(&self, x: &[usize]) -> Result<f64> {
        let mut s = self.start();
        let mut p = 1.0;
        for &sym in x {
            p *= s.conditional()[sym];
            if p == 0.0 {
                return Ok(0.0);
            }
            s.update(sym)?;
        }
        Ok(p)
    }
}

pub type PredictorRef = Arc<dyn Predictor>;

pub trait PredictorState: Send {
    fn conditional(&self) -> Vec<f64>;
    fn update(&mut self, sym: usize) -> Result<()>;
    fn clone_box(&self) -> Box<dyn PredictorState>;
}

/// Symbol of maximal conditional probability; ties go to the smallest symbol.
pub fn predict_ml(cond: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in cond.iter().enumerate().skip(1) {
        if p > cond[best] {
            best = i;
        }
    }
    best
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(GrlError::InvalidArgument(format!(
            "invalid symbol distribution {probs:?}"
        )));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(GrlError::InvalidArgument(format!(
            "symbol distribution sums to {s}"
        )));
    }
    Ok(())
}

/// An i.i.d. source.
#[derive(Debug, Clone)]
pub struct Iid {
    name: String,
    probs: Vec<f64>,
}

impl Iid {
    pub fn new(name: impl Into<String>, probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        Ok(Self {
            name: name.into(),
            probs,
        })
    }

    /// Binary source emitting 1 with probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(format!("bernoulli_{p}"), vec![1.0 - p, p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Clone)]
struct IidState(Arc<[f64]>);

impl PredictorState for IidState {
    fn conditional(&self) -> Vec<f64> {
        self.0.to_vec()
    }
    fn update(&mut self, _sym: usize) -> Result<()> {
        Ok(())
    }
    fn clone_box(&self) -> Box<dyn PredictorState> {
        Box::new(self.clone())
    }
}

impl Predictor for Iid {
    fn name(&self) -> &str {
        &self.name
    }
    fn alphabet(&self) -> usize {
        self.probs.len()
    }
    fn start(&self) -> Box<dyn PredictorState> {
        Box::new(IidState(self.probs.clone().into()))
    }
}

/// Add-one rule: ρ(a | x) = (#a in x + 1) / (|x| + #X).
#[derive(Debug, Clone)]
pub struct Laplace {
    alphabet: usize,
}

impl Laplace {
    pub fn new(alphabet: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(GrlError::InvalidArgument(
                "alphabet needs at least two symbols".into(),
            ));
        }
        Ok(Self { alphabet })
    }
}

#[derive(Clone)]
struct LaplaceState {
    counts: Vec<u64>,
    n: u64,
}

impl PredictorState for LaplaceState {
    fn conditional(&self) -> Vec<f64> {
        let denom = (self.n + self.counts.len() as u64) as f64;
        self.counts
            .iter()
            .map(|&c| (c + 1) as f64 / denom)
            .collect()
    }
    fn update(&mut self, sym: usize) -> Result<()> {
        let c = self.counts.get_mut(sym).ok_or_else(|| {
            GrlError::InvalidArgument(format!("symbol {sym} outside the alphabet"))
        })?;
        *c += 1;
        self.n += 1;
        Ok(())
    }
    fn clone_box(&self) -> Box<dyn PredictorState> {
        Box::new(self.clone())
    }
}

impl Predictor for Laplace {
    fn name(&self) -> &str {
        "laplace"
    }
    fn alphabet(&self) -> usize {
        self.alphabet
    }
    fn start(&self) -> Box<dyn PredictorState> {
        Box::new(LaplaceState {
            counts: vec![0; self.alphabet],
            n: 0,
        })
    }
}

/// Bayesian mixture of predictors.
#[derive(Debug, Clone)]
pub struct MixturePredictor {
    name: String,
    members: Vec<PredictorRef>,
    prior: Vec<f64>,
}

impl MixturePredictor {
    pub fn new(name: impl Into<String>, members: Vec<PredictorRef>, prior: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != prior.len() {
            return Err(GrlError::InvalidArgument(
                "mixture needs one prior weight per member".into(),
            ));
        }
        let k = members[0].alphabet();
        if members.iter().any(|m| m.alphabet() != k) {
            return Err(GrlError::InvalidArgument(
                "mixture members must share the alphabet".into(),
            ));
        }
        if prior.iter().any(|w| !(*w > 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(GrlError::InvalidArgument(
                "prior must be positive and sum to 1".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            members,
            prior,
        })
    }

    /// Uniform mixture over Bernoulli(k/(n+1)), k = 1..n.
    pub fn bernoulli_grid(n: usize) -> Result<Self> {
        let members = (1..=n)
            .map(|k| Ok(Arc::new(Iid::bernoulli(k as f64 / (n + 1) as f64)?) as PredictorRef))
            .collect::<Result<Vec<_>>>()?;
        Self::new(format!("grid_{n}"), members, vec![1.0 / n as f64; n])
    }

    pub fn members(&self) -> &[PredictorRef] {
        &self.members
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Posterior weights after `x`.
    pub fn posterior(&self, x: &[usize]) -> Result<Vec<f64>> {
        let mut s = self.mixture_state();
        for &sym in x {
            s.update(sym)?;
        }
        Ok(s.weights)
    }

    fn mixture_state(&self) -> MixtureState {
        MixtureState {
            weights: self.prior.clone(),
            states: self.members.iter().map(|m| m.start()).collect(),
            t: 1,
        }
    }
}

struct MixtureState {
    weights: Vec<f64>,
    states: Vec<Box<dyn PredictorState>>,
    t: usize,
}

impl PredictorState for MixtureState {
    fn conditional(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, s) in self.weights.iter().zip(&self.states) {
            if *w > 0.0 {
                let c = s.conditional();
                out.resize(c.len(), 0.0);
                for (o, p) in out.iter_mut().zip(c) {
                    *o += w * p;
                }
            }
        }
        out
    }
    fn update(&mut self, sym: usize) -> Result<()> {
        let lik: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.conditional().get(sym).copied().unwrap_or(0.0))
            .collect();
        bayes_update(&mut self.weights, &lik).ok_or(GrlError::Unrealizable { t: self.t })?;
        for s in &mut self.states {
            s.update(sym)?;
        }
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> Box<dyn PredictorState> {
        Box::new(MixtureState {
            weights: self.weights.clone(),
            states: self.states.iter().map(|s| s.clone_box()).collect(),
            t: self.t,
        })
    }
}

impl Predictor for MixturePredictor {
    fn name(&self) -> &str {
        &self.name
    }
    fn alphabet(&self) -> usize {
        self.members[0].alphabet()
    }
    fn start(&self) -> Box<dyn PredictorState> {
        Box::new(self.mixture_state())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Laplace {
        #[serde(default = "two")]
        alphabet: usize,
    },
    Bernoulli {
        p: f64,
    },
    Iid {
        probs: Vec<f64>,
    },
    /// Uniform mixture over Bernoulli(k/(n+1)), k = 1..n.
    BernoulliGrid {
        n: usize,
    },
}

fn two() -> usize {
    2
}

impl PredictorSpec {
    pub fn build(&self) -> Result<PredictorRef> {
        Ok(match self {
            PredictorSpec::Laplace { alphabet } => Arc::new(Laplace::new(*alphabet)?),
            PredictorSpec::Bernoulli { p } => Arc::new(Iid::bernoulli(*p)?),
            PredictorSpec::Iid { probs } => Arc::new(Iid::new("iid", probs.clone())?),
            PredictorSpec::BernoulliGrid { n } => {
                if *n == 0 {
                    return Err(GrlError::InvalidArgument("grid needs n ≥ 1".into()));
                }
                Arc::new(MixturePredictor::bernoulli_grid(*n)?)
            }
        })
    }
}

/// Per-predictor ML predictions and error counts along one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLedger {
    pub names: Vec<String>,
    pub symbols: Vec<usize>,
    /// `predictions[j][t-1]`: predictor j's guess for x_t.
    pub predictions: Vec<Vec<usize>>,
    /// `cumulative[j][t-1]` = E_t for predictor j.
    pub cumulative: Vec<Vec<u64>>,
}

impl PredictionLedger {
    pub fn error(&self, j: usize, t: usize) -> u64 {
        u64::from(self.predictions[j][t - 1] != self.symbols[t - 1])
    }

    pub fn total_errors(&self, j: usize) -> u64 {
        self.cumulative[j].last().copied().unwrap_or(0)
    }
}

/// Runs ML prediction for each predictor along `x`.
pub fn ledger(predictors: &[PredictorRef], x: &[usize]) -> Result<PredictionLedger> {
    let mut states: Vec<_> = predictors.iter().map(|p| p.start()).collect();
    let mut predictions = vec![Vec::with_capacity(x.len()); predictors.len()];
    let mut cumulative = vec![Vec::with_capacity(x.len()); predictors.len()];
    for &sym in x {
        for (j, s) in states.iter_mut().enumerate() {
            let guess = predict_ml(&s.conditional());
            let prev = cumulative[j].last().copied().unwrap_or(0);
            cumulative[j].push(prev + u64::from(guess != sym));
            predictions[j].push(guess);
            s.update(sym)?;
        }
    }
    Ok(PredictionLedger {
        names: predictors.iter().map(|p| p.name().to_string()).collect(),
        symbols: x.to_vec(),
        predictions,
        cumulative,
    })
}

/// Samples `len` symbols from `p`.
pub fn sample_sequence(p: &dyn Predictor, len: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let mut s = p.start();
    let mut x = Vec::with_capacity(len);
    for _ in 0..len {
        let sym = rng.categorical(&s.conditional());
        s.update(sym)?;
        x.push(sym);
    }
    Ok(x)
}

/// z_t = 0 if Q(0 | z_{<t}) < ½, else 1.
pub fn adversarial_sequence(q: &dyn Predictor, len: usize) -> Result<Vec<usize>> {
    if q.alphabet() != 2 {
        return Err(GrlError::InvalidArgument(
            "adversarial sequences need a binary alphabet".into(),
        ));
    }
    let mut s = q.start();
    let mut z = Vec::with_capacity(len);
    for _ in 0..len {
        let sym = if s.conditional()[0] < 0.5 { 0 } else { 1 };
        s.update(sym)?;
        z.push(sym);
    }
    Ok(z)
}

/// Divergences between the length-`d` continuation distributions of P and Q after `x`, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergences {
    pub kl: f64,
    pub tv: f64,
    pub entropy_p: f64,
    pub entropy_q: f64,
}

impl Divergences {
    /// TV ≤ √(KL/2) with KL in nats.
    pub fn pinsker_holds(&self) -> bool {
        self.tv <= (self.kl * std::f64::consts::LN_2 / 2.0).sqrt() + 1e-12
    }
}

fn continuation_probs(
    s: &dyn PredictorState,
    d: usize,
    acc: f64,
    out: &mut Vec<f64>,
) -> Result<()> {
    if d == 0 {
        out.push(acc);
        return Ok(());
    }
    let c = s.conditional();
    for (sym, &p) in c.iter().enumerate() {
        let next = acc * p;
        if next == 0.0 {
            push_zeros(c.len(), d - 1, out);
            continue;
        }
        let mut child = s.clone_box();
        child.update(sym)?;
        continuation_probs(child.as_ref(), d - 1, next, out)?;
    }
    Ok(())
}

fn push_zeros(k: usize, d: usize, out: &mut Vec<f64>) {
    out.resize(out.len() + k.pow(d as u32), 0.0);
}

/// Exact KL, TV and entropies over all length-`d` continuations of `x`.
pub fn divergences(
    p: &dyn Predictor,
    q: &dyn Predictor,
    x: &[usize],
    d: usize,
    cap: usize,
) -> Result<Divergences> {
    if p.alphabet() != q.alphabet() {
        return Err(GrlError::InvalidArgument(
            "predictors have different alphabets".into(),
        ));
    }
    if d > cap {
        return Err(GrlError::EnumerationCap(format!(
            "divergence lookahead {d} exceeds the cap {cap}"
        )));
    }
    let dist = |pr: &dyn Predictor| -> Result<Vec<f64>> {
        let mut s = pr.start();
        for &sym in x {
            s.update(sym)?;
        }
        let mut out = Vec::new();
        continuation_probs(s.as_ref(), d, 1.0, &mut out)?;
        Ok(out)
    };
    let (pp, qq) = (dist(p)?, dist(q)?);
    Ok(Divergences {
        kl: kl_divergence(&pp, &qq),
        tv: total_variation(&pp, &qq),
        entropy_p: entropy(&pp),
        entropy_q: entropy(&qq),
    })
}

/// KL(P^t ‖ Q^t) in bits for t = 1..=len, where P is i.i.d. Bernoulli(`p_one`)
/// and Q is exchangeable (its conditionals depend only on symbol counts).
pub fn iid_kl_trajectory(p_one: f64, q: &dyn Predictor, len: usize) -> Result<Vec<f64>> {
    if q.alphabet() != 2 || !(0.0..=1.0).contains(&p_one) {
        return Err(GrlError::InvalidArgument(
            "KL trajectory needs a binary predictor and p in [0, 1]".into(),
        ));
    }
    let truth = [1.0 - p_one, p_one];
    // row[c] = (P(c ones among the first k symbols), Q's state after such a prefix)
    let mut row: Vec<(f64, Box<dyn PredictorState>)> = vec![(1.0, q.start())];
    let mut kl = 0.0;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        for (mass, s) in &row {
            if *mass > 0.0 {
                kl += mass * kl_divergence(&truth, &s.conditional());
            }
        }
        out.push(kl);
        let k = row.len();
        let mut next = Vec::with_capacity(k + 1);
        for c in 0..=k {
            let from_zero = if c < k { row[c].0 * truth[0] } else { 0.0 };
            let from_one = if c > 0 { row[c - 1].0 * truth[1] } else { 0.0 };
            let mut s = if c < k {
                row[c].1.clone_box()
            } else {
                row[c - 1].1.clone_box()
            };
            let mass = from_zero + from_one;
            if mass > 0.0 {
                s.update(if c < k { 0 } else { 1 })?;
            }
            next.push((mass, s));
        }
        row = next;
    }
    Ok(out)
}

/// Expected-regret bound 2·KL + 2·√(2·KL·E[E^P]).
pub fn regret_bound(kl: f64, mean_truth_errors: f64) -> f64 {
    2.0 * kl + 2.0 * (2.0 * kl * mean_truth_errors).sqrt()
}

/// One seeded regret trajectory of Q against the truth P, which generates the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRun {
    /// E^Q_t for t = 1..T.
    pub errors_q: Vec<u64>,
    /// E^P_t for t = 1..T.
    pub errors_p: Vec<u64>,
}

impl RegretRun {
    pub fn regret(&self, t: usize) -> i64 {
        self.errors_q[t - 1] as i64 - self.errors_p[t - 1] as i64
    }
}

pub fn prediction_regret(
    truth: &PredictorRef,
    q: &PredictorRef,
    len: usize,
    seed: u64,
) -> Result<RegretRun> {
    let mut rng = RngStream::from_seed(seed).split("prediction");
    let x = sample_sequence(truth.as_ref(), len, &mut rng)?;
    let l = ledger(&[q.clone(), truth.clone()], &x)?;
    let mut cum = l.cumulative.into_iter();
    Ok(RegretRun {
        errors_q: cum.next().unwrap_or_default(),
        errors_p: cum.next().unwrap_or_default(),
    })
}
