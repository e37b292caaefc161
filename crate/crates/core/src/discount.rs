//! Discount functions, their normalizers and effective horizons.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};

/// Tolerance used when comparing a tail ratio against the requested epsilon.
const HORIZON_TOL: f64 = 1e-12;
/// Power-law tails below this index are summed directly before the asymptotic expansion takes over.
const POWER_DIRECT: usize = 64;
const MAX_HORIZON: usize = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountKind {
    /// γ_t = γ^t
    Geometric { gamma: f64 },
    /// γ_t = 1/m for t ≤ m, else 0
    FiniteHorizon { m: usize },
    /// γ_t = t^(−β)
    Power { beta: f64 },
    /// γ_t = e^(−√t)/√t
    Subgeometric,
}

impl DiscountKind {
    fn validate(&self) -> Result<()> {
        match *self {
            DiscountKind::Geometric { gamma } if !(gamma > 0.0 && gamma < 1.0) => Err(
                GrlError::InvalidArgument(format!("geometric gamma must be in (0,1), got {gamma}")),
            ),
            DiscountKind::FiniteHorizon { m: 0 } => Err(GrlError::InvalidArgument(
                "finite horizon m must be at least 1".into(),
            )),
            DiscountKind::Power { beta } if !(beta > 1.0 && beta.is_finite()) => Err(
                GrlError::InvalidArgument(format!("power beta must be > 1, got {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EffectiveHorizon {
    pub steps: usize,
    /// Set when Γ_t = 0, in which case `steps` is 0 by convention.
    pub exhausted: bool,
}

/// A discount function with cached tail sums. Cheap to clone; clones share the cache.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "DiscountKind", into = "DiscountKind")]
pub struct DiscountSchedule {
    kind: DiscountKind,
    tails: Arc<Mutex<HashMap<usize, f64>>>,
}

impl fmt::Debug for DiscountSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl PartialEq for DiscountSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl TryFrom<DiscountKind> for DiscountSchedule {
    type Error = GrlError;
    fn try_from(kind: DiscountKind) -> Result<Self> {
        Self::new(kind)
    }
}

impl From<DiscountSchedule> for DiscountKind {
    fn from(s: DiscountSchedule) -> Self {
        s.kind
    }
}

impl DiscountSchedule {
    pub fn new(kind: DiscountKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            tails: Arc::default(),
        })
    }

    pub fn geometric(gamma: f64) -> Result<Self> {
        Self::new(DiscountKind::Geometric { gamma })
    }

    pub fn finite_horizon(m: usize) -> Result<Self> {
        Self::new(DiscountKind::FiniteHorizon { m })
    }

    pub fn power(beta: f64) -> Result<Self> {
        Self::new(DiscountKind::Power { beta })
    }

    pub fn subgeometric() -> Self {
        Self::new(DiscountKind::Subgeometric).expect("no parameters")
    }

    pub fn kind(&self) -> DiscountKind {
        self.kind
    }

    /// γ_t for t ≥ 1.
    pub fn weight(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match self.kind {
            DiscountKind::Geometric { gamma } => geometric_pow(gamma, t),
            DiscountKind::FiniteHorizon { m } => {
                if t <= m {
                    1.0 / m as f64
                } else {
                    0.0
                }
            }
            DiscountKind::Power { beta } => (t as f64).powf(-beta),
            DiscountKind::Subgeometric => subgeometric_weight(t),
        }
    }

    /// Γ_t = Σ_{k ≥ t} γ_k.
    pub fn normalizer(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match self.kind {
            DiscountKind::Geometric { gamma } => geometric_pow(gamma, t) / (1.0 - gamma),
            DiscountKind::FiniteHorizon { m } => {
                if t <= m {
                    (m - t + 1) as f64 / m as f64
                } else {
                    0.0
                }
            }
            DiscountKind::Power { beta } => power_tail(beta, t),
            DiscountKind::Subgeometric => self.cached(t, subgeometric_tail),
        }
    }

    /// H_t(ε) = min{k : Γ_{t+k}/Γ_t ≤ ε}.
    pub fn effective_horizon(&self, t: usize, eps: f64) -> Result<EffectiveHorizon> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(GrlError::InvalidArgument(format!(
                "effective horizon eps must be in (0,1], got {eps}"
            )));
        }
        if self.exhausted(t) {
            return Ok(EffectiveHorizon {
                steps: 0,
                exhausted: true,
            });
        }
        let ok = |k: usize| -> bool { self.tail_ratio(t, t + k) <= eps + HORIZON_TOL };
        let steps = if let DiscountKind::Geometric { gamma } = self.kind {
            // γ^k ≤ ε is independent of t; start from the logarithm and fix rounding.
            let mut k = ((eps.ln() / gamma.ln()).ceil().max(0.0)) as usize;
            while k > 0 && ok(k - 1) {
                k -= 1;
            }
            while !ok(k) {
                k += 1;
            }
            k
        } else if ok(0) {
            0
        } else {
            let mut hi = 1usize;
            while !ok(hi) {
                if hi >= MAX_HORIZON {
                    return Ok(EffectiveHorizon {
                        steps: MAX_HORIZON,
                        exhausted: false,
                    });
                }
                hi *= 2;
            }
            let mut lo = hi / 2; // ok(lo) is false
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        Ok(EffectiveHorizon {
            steps,
            exhausted: false,
        })
    }

    /// Whether Γ_t = 0, i.e. no reward from t on counts.
    pub fn exhausted(&self, t: usize) -> bool {
        match self.kind {
            DiscountKind::Geometric { .. } => false,
            _ => !(self.normalizer(t) > 0.0),
        }
    }

    /// Γ_m/Γ_t for m ≥ t; 0 when Γ_t = 0. Exact for geometric discounting at any t.
    pub fn tail_ratio(&self, t: usize, m: usize) -> f64 {
        match self.kind {
            DiscountKind::Geometric { gamma } => geometric_pow(gamma, m.saturating_sub(t)),
            _ => {
                let gt = self.normalizer(t);
                if gt > 0.0 {
                    self.normalizer(m) / gt
                } else {
                    0.0
                }
            }
        }
    }

    /// γ_k/Γ_t for k ≥ t; 0 when Γ_t = 0. Exact for geometric discounting at any t.
    pub fn relative_weight(&self, k: usize, t: usize) -> f64 {
        match self.kind {
            DiscountKind::Geometric { gamma } => {
                (1.0 - gamma) * geometric_pow(gamma, k.saturating_sub(t))
            }
            _ => {
                let gt = self.normalizer(t);
                if gt > 0.0 {
                    self.weight(k) / gt
                } else {
                    0.0
                }
            }
        }
    }

    fn cached(&self, t: usize, f: fn(usize) -> f64) -> f64 {
        let mut cache = self.tails.lock().unwrap_or_else(|e| e.into_inner());
        *cache.entry(t).or_insert_with(|| f(t))
    }
}

fn geometric_pow(gamma: f64, t: usize) -> f64 {
    match i32::try_from(t) {
        Ok(n) => gamma.powi(n),
        Err(_) => 0.0,
    }
}

/// Σ_{k ≥ t} k^(−β): direct summation up to an index of at least 64, then
/// Euler–Maclaurin with the B2, B4 and B6 correction terms.
fn power_tail(beta: f64, t: usize) -> f64 {
    let k0 = t.max(POWER_DIRECT);
    let kf = k0 as f64;
    let b = beta;
    let tail = kf.powf(1.0 - b) / (b - 1.0)
        + 0.5 * kf.powf(-b)
        + b / 12.0 * kf.powf(-b - 1.0)
        - b * (b + 1.0) * (b + 2.0) / 720.0 * kf.powf(-b - 3.0)
        + b * (b + 1.0) * (b + 2.0) * (b + 3.0) * (b + 4.0) / 30240.0 * kf.powf(-b - 5.0);
    let direct: f64 = (t..k0).rev().map(|k| (k as f64).powf(-b)).sum();
    tail + direct
}

fn subgeometric_weight(t: usize) -> f64 {
    let s = (t as f64).sqrt();
    (-s).exp() / s
}

/// Σ_{k ≥ t} e^(−√k)/√k, summed until the remainder bound f(K) + 2e^(−√K)
/// is negligible relative to the partial sum.
fn subgeometric_tail(t: usize) -> f64 {
    let mut terms = Vec::new();
    let mut partial = 0.0;
    let mut k = t;
    loop {
        let f = subgeometric_weight(k);
        terms.push(f);
        partial += f;
        k += 1;
        let bound = subgeometric_weight(k) + 2.0 * (-(k as f64).sqrt()).exp();
        if bound <= 1e-18 * partial || bound == 0.0 {
            break;
        }
    }
    // Sum smallest terms first.
    terms.iter().rev().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn weights() {
        assert_eq!(DiscountSchedule::geometric(0.5).unwrap().weight(3), 0.125);
        assert_eq!(DiscountSchedule::finite_horizon(4).unwrap().weight(5), 0.0);
        assert_eq!(DiscountSchedule::power(2.0).unwrap().weight(2), 0.25);
    }

    #[test]
    fn normalizers() {
        let g = DiscountSchedule::geometric(0.5).unwrap();
        assert!(close(g.normalizer(1), 1.0, 1e-15));
        assert!(close(g.normalizer(3), 0.25, 1e-15));
        let f = DiscountSchedule::finite_horizon(4).unwrap();
        assert_eq!(f.normalizer(2), 0.75);
        assert_eq!(f.normalizer(5), 0.0);
        // Σ k^-2 = π²/6
        let p = DiscountSchedule::power(2.0).unwrap();
        assert!(close(p.normalizer(1), std::f64::consts::PI.powi(2) / 6.0, 1e-13));
        // ∫ e^{-√x}/√x = 2 e^{-√x}; the sum from 1 is a bit above 2e^{-1}
        let s = DiscountSchedule::subgeometric();
        assert!(s.normalizer(1) > 2.0 * (-1f64).exp());
    }

    #[test]
    fn gamma_recursion_all_kinds() {
        let scheds = [
            DiscountSchedule::geometric(0.9).unwrap(),
            DiscountSchedule::finite_horizon(50).unwrap(),
            DiscountSchedule::power(1.5).unwrap(),
            DiscountSchedule::power(3.0).unwrap(),
            DiscountSchedule::subgeometric(),
        ];
        for s in &scheds {
            for t in 1..=200 {
                let d = s.normalizer(t) - s.weight(t) - s.normalizer(t + 1);
                assert!(d.abs() <= 1e-12, "{s:?} t={t} diff={d}");
            }
        }
    }

    #[test]
    fn effective_horizon_examples() {
        let g = DiscountSchedule::geometric(0.5).unwrap();
        assert_eq!(g.effective_horizon(1, 0.25).unwrap().steps, 2);
        assert_eq!(g.effective_horizon(7, 0.25).unwrap().steps, 2);
        let p = DiscountSchedule::power(2.0).unwrap();
        assert_eq!(p.effective_horizon(10, 1.0).unwrap().steps, 0);
        let scan = (0..)
            .find(|&k| p.normalizer(10 + k) / p.normalizer(10) <= 0.5)
            .unwrap();
        assert_eq!(p.effective_horizon(10, 0.5).unwrap().steps, scan);
        let f = DiscountSchedule::finite_horizon(4).unwrap();
        let h = f.effective_horizon(5, 0.5).unwrap();
        assert!(h.exhausted && h.steps == 0);
        // ⌈(m−t+1)(1−ε)⌉
        assert_eq!(f.effective_horizon(1, 0.5).unwrap().steps, 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DiscountSchedule::geometric(1.0).is_err());
        assert!(DiscountSchedule::power(1.0).is_err());
        assert!(DiscountSchedule::finite_horizon(0).is_err());
        assert!(DiscountSchedule::geometric(0.5)
            .unwrap()
            .effective_horizon(1, 0.0)
            .is_err());
    }
}
