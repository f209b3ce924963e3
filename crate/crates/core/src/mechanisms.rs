//! Differential-privacy primitives: budgets and their composition, the Laplace
//! and exponential mechanisms, and closed-form calculators for how much
//! adversarial corruption a pure or approximate DP mechanism tolerates.
//!
//! Group privacy drives the robustness calculators. If a mechanism fails
//! with probability at most `beta` on clean data, then after `t` of its inputs
//! are replaced the failure probability is at most
//! `e^(eps * t) * (beta + t * delta)`.

use rand::Rng;

use crate::error::{param, Error, Result};
use crate::noise::laplace_noise;

/// Relative slack used when comparing budget sums.
const BUDGET_TOLERANCE: f64 = 1e-9;

/// An `(epsilon, delta)` budget, optionally carrying a zCDP `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    rho: Option<f64>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(param(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(param(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(Self {
            epsilon,
            delta,
            rho: None,
        })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(param(format!("rho must be positive, got {rho}")));
        }
        self.rho = Some(rho);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    /// `parts` equal shares whose basic composition is exactly `self`.
    pub fn split(&self, parts: usize) -> Result<Vec<PrivacyBudget>> {
        if parts == 0 {
            return Err(param("cannot split a budget into zero parts"));
        }
        let n = parts as f64;
        let share = PrivacyBudget {
            epsilon: self.epsilon / n,
            delta: self.delta / n,
            rho: self.rho.map(|r| r / n),
        };
        Ok(vec![share; parts])
    }

    /// A share of `fraction` of this budget.
    pub fn fraction(&self, fraction: f64) -> Result<PrivacyBudget> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(param(format!("budget fraction must lie in (0, 1], got {fraction}")));
        }
        Ok(PrivacyBudget {
            epsilon: self.epsilon * fraction,
            delta: self.delta * fraction,
            rho: self.rho.map(|r| r * fraction),
        })
    }
}

/// Basic composition: epsilons and deltas add. `rho` is summed only when every
/// input carries one.
pub fn compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    if budgets.is_empty() {
        return Err(param("compose needs at least one budget"));
    }
    let epsilon = budgets.iter().map(|b| b.epsilon).sum();
    let delta: f64 = budgets.iter().map(|b| b.delta).sum();
    let rho = budgets
        .iter()
        .map(|b| b.rho)
        .try_fold(0.0, |acc, r| r.map(|r| acc + r));
    Ok(PrivacyBudget {
        epsilon,
        delta: delta.min(1.0 - f64::EPSILON),
        rho,
    })
}

/// Tracks how a total budget is spent across the stages of a pipeline.
#[derive(Debug, Clone)]
pub struct BudgetLedger {
    total: PrivacyBudget,
    entries: Vec<(String, PrivacyBudget)>,
}

impl BudgetLedger {
    pub fn new(total: PrivacyBudget) -> Self {
        Self {
            total,
            entries: Vec::new(),
        }
    }

    pub fn total(&self) -> PrivacyBudget {
        self.total
    }

    /// Records a spend, refusing it if the running epsilon or delta would
    /// exceed the total.
    pub fn charge(&mut self, label: impl Into<String>, budget: PrivacyBudget) -> Result<()> {
        let eps = self.spent_epsilon();
        let delta: f64 = self.entries.iter().map(|(_, b)| b.delta).sum();
        let limit = self.total.epsilon * (1.0 + BUDGET_TOLERANCE);
        if eps + budget.epsilon > limit
            || delta + budget.delta > self.total.delta * (1.0 + BUDGET_TOLERANCE) + f64::MIN_POSITIVE
        {
            return Err(Error::BudgetExceeded {
                requested: budget.epsilon,
                remaining: self.total.epsilon - eps,
            });
        }
        self.entries.push((label.into(), budget));
        Ok(())
    }

    pub fn spent_epsilon(&self) -> f64 {
        self.entries.iter().map(|(_, b)| b.epsilon).sum()
    }

    /// Composition of everything charged so far, `None` if nothing was charged.
    pub fn spent(&self) -> Option<PrivacyBudget> {
        let budgets: Vec<_> = self.entries.iter().map(|(_, b)| *b).collect();
        compose(&budgets).ok()
    }

    pub fn entries(&self) -> &[(String, PrivacyBudget)] {
        &self.entries
    }
}

/// Releases `f_value + Lap(l1_sensitivity / epsilon)` per coordinate.
///
/// The caller vouches for `l1_sensitivity`; nothing here checks it.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    rng: &mut R,
    f_value: &[f64],
    l1_sensitivity: f64,
    budget: PrivacyBudget,
) -> Result<Vec<f64>> {
    if !(l1_sensitivity > 0.0) {
        return Err(param(format!("sensitivity must be positive, got {l1_sensitivity}")));
    }
    let scale = l1_sensitivity / budget.epsilon;
    Ok(f_value
        .iter()
        .map(|v| v + laplace_noise(rng, scale))
        .collect())
}

/// A finite candidate set with one score per candidate and the score's sensitivity.
#[derive(Debug, Clone)]
pub struct ScoredCandidates<T> {
    candidates: Vec<T>,
    scores: Vec<f64>,
    sensitivity: f64,
}

impl<T> ScoredCandidates<T> {
    pub fn new(candidates: Vec<T>, scores: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(param("exponential mechanism needs at least one candidate"));
        }
        if candidates.len() != scores.len() {
            return Err(param(format!(
                "{} candidates but {} scores",
                candidates.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(param("scores must be finite"));
        }
        if !(sensitivity > 0.0) {
            return Err(param(format!("sensitivity must be positive, got {sensitivity}")));
        }
        Ok(Self {
            candidates,
            scores,
            sensitivity,
        })
    }

    pub fn candidates(&self) -> &[T] {
        &self.candidates
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Exact output distribution of the exponential mechanism at `epsilon`.
    pub fn probabilities(&self, epsilon: f64) -> Vec<f64> {
        let w = softmax_weights(&self.scores, epsilon / (2.0 * self.sensitivity));
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Samples a candidate with probability proportional to
/// `exp(epsilon * score / (2 * sensitivity))`.
pub fn exponential_mechanism<'a, T, R: Rng + ?Sized>(
    rng: &mut R,
    sc: &'a ScoredCandidates<T>,
    budget: PrivacyBudget,
) -> &'a T {
    let idx = sample_exponential_index(rng, &sc.scores, sc.sensitivity, budget.epsilon);
    &sc.candidates[idx]
}

fn softmax_weights(scores: &[f64], rate: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|s| ((s - max) * rate).exp()).collect()
}

/// Index-level exponential mechanism used by the estimators' inner loops.
///
/// Weights are shifted by the maximum score before exponentiation; the draw
/// walks the cumulative sum so ties resolve toward the earlier candidate.
/// An infinite `epsilon` returns the first maximiser.
pub(crate) fn sample_exponential_index<R: Rng + ?Sized>(
    rng: &mut R,
    scores: &[f64],
    sensitivity: f64,
    epsilon: f64,
) -> usize {
    debug_assert!(!scores.is_empty());
    let rate = epsilon / (2.0 * sensitivity);
    if rate.is_infinite() {
        return argmax_first(scores);
    }
    let weights = softmax_weights(scores, rate);
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding left `target` at the very top of the range
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Corruption tolerance of a mechanism together with the failure bound at that level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessBound {
    /// Tolerable corruption fraction, capped at 1.
    pub eta: f64,
    /// Failure-probability bound with `floor(eta * n)` corrupted samples.
    pub failure_bound: f64,
}

/// `eta(n) = min(ln(1/beta)/(eps n), ln(1/delta)/(eps n + ln n))`, hidden
/// constants set to one; `delta == 0` keeps only the first term.
pub fn meta_theorem_eta(beta: f64, epsilon: f64, delta: f64, n: u64) -> Result<RobustnessBound> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(param(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(epsilon > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(param(format!("delta must lie in [0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(param("n must be at least 1"));
    }
    let nf = n as f64;
    let pure_term = (1.0 / beta).ln() / (epsilon * nf);
    let eta = if delta > 0.0 {
        pure_term.min((1.0 / delta).ln() / (epsilon * nf + nf.ln()))
    } else {
        pure_term
    };
    let eta = eta.min(1.0);
    // guard against eta * n landing a hair under an integer
    let corrupted = (eta * nf * (1.0 + 1e-12)).floor() as u64;
    Ok(RobustnessBound {
        eta,
        failure_bound: meta_theorem_failure_bound(beta, epsilon, delta, corrupted),
    })
}

/// `min(1, e^(eps t) (beta + t delta))` for `t` corrupted samples.
pub fn meta_theorem_failure_bound(beta: f64, epsilon: f64, delta: f64, corrupted_count: u64) -> f64 {
    let t = corrupted_count as f64;
    ((epsilon * t).exp() * (beta + t * delta)).min(1.0)
}

/// Converts `rho`-zCDP to `(rho + 2 sqrt(rho ln(1/delta)), delta)`-DP.
pub fn zcdp_to_approx(rho: f64, delta: f64) -> Result<PrivacyBudget> {
    if !(rho > 0.0) {
        return Err(param(format!("rho must be positive, got {rho}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param(format!(
            "zCDP conversion needs delta in (0, 1), got {delta}"
        )));
    }
    let epsilon = rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt();
    PrivacyBudget::new(epsilon, delta)?.with_rho(rho)
}
