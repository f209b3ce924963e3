use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{param, Result};
use crate::harness::records::{Metric, TrialRecord};
use crate::noise::RngHandle;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median (mean of the two middle values for even lengths); NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Percentile bootstrap interval for the mean. Returns `(low, mean, high)`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    confidence: f64,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Err(param("bootstrap needs at least two values"));
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(param(format!("confidence must lie in [0, 1), got {confidence}")));
    }
    let mid = mean(values);
    if confidence == 0.0 || resamples == 0 {
        return Ok((mid, mid, mid));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let at = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        means[idx.min(resamples - 1)]
    };
    // keep the reported interval around the point estimate despite rounding
    Ok((at(tail).min(mid), mid, at(1.0 - tail).max(mid)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: String,
    pub sweep_value: f64,
    pub metric: Metric,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-(algorithm, sweep value) aggregates of `metric`, ignoring NaN rows.
/// The bootstrap stream is fixed so summaries are reproducible.
pub fn summarize(records: &[TrialRecord], metric: Metric, resamples: usize, confidence: f64) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric && !r.value.is_nan()) {
        // order sweep values numerically through their bit pattern (all positive)
        groups
            .entry((r.algorithm.clone(), r.sweep_value.to_bits()))
            .or_insert_with(|| (r.sweep_value, Vec::new()))
            .1
            .push(r.value);
    }
    let mut rng = RngHandle::new(0).derive("bootstrap").rng();
    groups
        .into_iter()
        .map(|((algorithm, _), (sweep_value, values))| {
            let m = mean(&values);
            let (lo, _, hi) = bootstrap_ci(&values, resamples, confidence, &mut rng).unwrap_or((m, m, m));
            Summary {
                algorithm,
                sweep_value,
                metric,
                count: values.len(),
                mean: m,
                median: median(&values),
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect()
}
