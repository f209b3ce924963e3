//! Linear-time sparse mean estimation by coordinate-wise thresholding.
//!
//! Samples are averaged in buckets of size `b`; each coordinate is scored by
//! how many bucket means clear the threshold `T` in absolute value. `k` rounds
//! of the exponential mechanism pick the support from these scores, and each
//! selected coordinate is then estimated with [`kv1d_estimate`] on its bucket
//! means. Half of the budget goes to support selection and half to the `k`
//! univariate estimates.
//!
//! The support scores never look at the range bound `R`; only the univariate
//! stage does, through the size of its histogram.

use rand::Rng;

use crate::data::{bucket_means, BucketedDataset, Dataset};
use crate::error::{param, Error, Result};
use crate::kv::{kv1d_estimate, Kv1dParams};
use crate::mechanisms::{sample_exponential_index, BudgetLedger, PrivacyBudget};

/// Factor in the bucket-size rule `b = ceil(15 k sigma^2 / alpha^2)`.
pub const BUCKET_RULE_FACTOR: f64 = 15.0;
/// Threshold in units of the bucket-mean standard deviation, `T = 3.5 sigma / sqrt(b)`.
pub const THRESHOLD_SIGMAS: f64 = 3.5;

/// Whether a bucket mean counts toward its coordinate's score when it exceeds
/// `T` (one-sided) or when its magnitude does (two-sided).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    OneSided,
    #[default]
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdParams {
    pub k: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub sigma2: f64,
    /// Target l2 error; only used by the automatic bucket-size rule.
    pub alpha: f64,
    pub range_bound: f64,
    pub bucket_size: Option<usize>,
    pub threshold: Option<f64>,
    pub sidedness: Sidedness,
}

impl ThresholdParams {
    pub fn new(
        k: usize,
        epsilon: f64,
        beta: f64,
        sigma2: f64,
        alpha: f64,
        range_bound: f64,
    ) -> Result<Self> {
        let p = Self {
            k,
            epsilon,
            beta,
            sigma2,
            alpha,
            range_bound,
            bucket_size: None,
            threshold: None,
            sidedness: Sidedness::TwoSided,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bucket_size(mut self, b: usize) -> Self {
        self.bucket_size = Some(b);
        self
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn with_sidedness(mut self, s: Sidedness) -> Self {
        self.sidedness = s;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(param(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(param(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.alpha > 0.0) {
            return Err(param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.range_bound > 0.0) {
            return Err(param(format!(
                "range bound must be positive, got {}",
                self.range_bound
            )));
        }
        if self.bucket_size == Some(0) {
            return Err(param("bucket size must be at least 1"));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0) {
                return Err(param(format!("threshold must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Bucket size for `n` samples: the explicit override, or
    /// `ceil(15 k sigma^2 / alpha^2)` clipped to `[1, n / 2]`.
    pub fn resolved_bucket_size(&self, n: usize) -> usize {
        self.bucket_size.unwrap_or_else(|| {
            let raw = (BUCKET_RULE_FACTOR * self.k as f64 * self.sigma2 / self.alpha.powi(2)).ceil();
            let upper = (n / 2).max(1);
            (raw.max(1.0) as usize).min(upper)
        })
    }

    /// The explicit threshold, or `3.5 sigma / sqrt(b)`.
    pub fn resolved_threshold(&self, b: usize) -> f64 {
        self.threshold
            .unwrap_or_else(|| THRESHOLD_SIGMAS * self.sigma2.sqrt() / (b as f64).sqrt())
    }
}

/// Per-coordinate threshold counts `z_i`, each in `[0, floor(n / b)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateScores {
    pub z: Vec<u64>,
}

impl CoordinateScores {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

pub fn coordinate_scores(bd: &BucketedDataset, threshold: f64, sidedness: Sidedness) -> CoordinateScores {
    let mut z = vec![0u64; bd.d()];
    for m in bd.means() {
        for (zi, &v) in z.iter_mut().zip(m) {
            let hit = match sidedness {
                Sidedness::OneSided => v >= threshold,
                Sidedness::TwoSided => v.abs() >= threshold,
            };
            *zi += u64::from(hit);
        }
    }
    CoordinateScores { z }
}

/// `k` rounds of the exponential mechanism (sensitivity 1, budget
/// `epsilon_support / k` each) over the not-yet-selected coordinates.
/// Returns coordinates in selection order.
pub fn select_support<R: Rng + ?Sized>(
    rng: &mut R,
    scores: &CoordinateScores,
    k: usize,
    epsilon_support: f64,
) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(param(format!("k={k} exceeds dimension {}", scores.len())));
    }
    if !(epsilon_support > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon_support}")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let per_round = epsilon_support / k as f64;
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut selected = Vec::with_capacity(k);
    let mut buf = Vec::with_capacity(scores.len());
    for _ in 0..k {
        buf.clear();
        buf.extend(remaining.iter().map(|&i| scores.z[i] as f64));
        let pick = sample_exponential_index(rng, &buf, 1.0, per_round);
        selected.push(remaining.remove(pick));
    }
    Ok(selected)
}

/// `20 k b (ln d + ln(4k / beta)) / epsilon`, the sample size at which the
/// score separation argument goes through.
pub fn theorem_sample_size(k: usize, b: usize, d: usize, beta: f64, epsilon: f64) -> f64 {
    let k = k as f64;
    20.0 * k * b as f64 * ((d as f64).ln() + (4.0 * k / beta).ln()) / epsilon
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutput {
    pub estimate: Vec<f64>,
    /// Selected coordinates in selection order.
    pub support: Vec<usize>,
    pub spent: PrivacyBudget,
    pub bucket_size: usize,
    pub threshold: f64,
}

fn prepare(data: &Dataset, p: &ThresholdParams) -> Result<(BucketedDataset, f64)> {
    p.validate()?;
    if p.k > data.d() {
        return Err(param(format!("k={} exceeds dimension {}", p.k, data.d())));
    }
    let b = p.resolved_bucket_size(data.n());
    if data.n() < 2 * b {
        return Err(param(format!(
            "need n >= 2b, got n={} and b={b}",
            data.n()
        )));
    }
    let bd = bucket_means(data, b)?;
    Ok((bd, p.resolved_threshold(b)))
}

/// Support selection alone, spending the whole budget on the `k` rounds.
pub fn threshold_support<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    p: &ThresholdParams,
) -> Result<Vec<usize>> {
    let (bd, t) = prepare(data, p)?;
    let scores = coordinate_scores(&bd, t, p.sidedness);
    select_support(rng, &scores, p.k, p.epsilon)
}

/// The full estimator: support with `epsilon / 2`, then one univariate
/// estimate per selected coordinate with `epsilon / (2k)` each; zero elsewhere.
pub fn threshold_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    p: &ThresholdParams,
) -> Result<ThresholdOutput> {
    let (bd, t) = prepare(data, p)?;
    let total = PrivacyBudget::pure(p.epsilon)?;
    let mut ledger = BudgetLedger::new(total);
    let mut estimate = vec![0.0; data.d()];
    if p.k == 0 {
        return Ok(ThresholdOutput {
            estimate,
            support: Vec::new(),
            spent: total,
            bucket_size: bd.bucket_size(),
            threshold: t,
        });
    }

    let support_budget = total.fraction(0.5)?;
    let scores = coordinate_scores(&bd, t, p.sidedness);
    let support = select_support(rng, &scores, p.k, support_budget.epsilon())?;
    ledger.charge("support", support_budget)?;

    let coord_budget = support_budget.split(p.k)?[0];
    let kv = Kv1dParams::new(
        coord_budget.epsilon(),
        (p.sigma2 / bd.bucket_size() as f64).sqrt(),
        p.range_bound,
        p.beta / (2.0 * p.k as f64),
    )?;
    for &i in &support {
        let values = bd.coordinate(i);
        estimate[i] = kv1d_estimate(rng, &values, &kv).map_err(|e| Error::Partial {
            stage: "univariate estimation",
            spent_epsilon: ledger.spent_epsilon(),
            source: Box::new(e),
        })?;
        ledger.charge(format!("coordinate {i}"), coord_budget)?;
    }

    Ok(ThresholdOutput {
        estimate,
        support,
        spent: ledger.spent().unwrap_or(total),
        bucket_size: bd.bucket_size(),
        threshold: t,
    })
}
