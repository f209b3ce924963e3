//! Monte-Carlo check of the group-privacy robustness bound: a mechanism whose
//! clean failure rate is `beta` fails with probability at most
//! `e^(eps t) (beta + t delta)` after `t` samples are replaced.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{contaminate, sample_gaussian_dataset, ContaminationSpec, ContaminationStrategy, Dataset, GroundTruth};
use crate::error::{param, Error, Result};
use crate::harness::records::{Metric, TrialRecord};
use crate::kv::{kv1d_estimate, Kv1dParams};
use crate::mechanisms::{laplace_mechanism, meta_theorem_failure_bound, PrivacyBudget};
use crate::noise::RngHandle;

/// Univariate mechanisms the checker can exercise on `N(0, 1)` data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustMechanism {
    /// Mean of values clamped to `[-clamp, clamp]` plus `Lap(2 clamp / (eps n))`.
    LaplaceMean { clamp: f64 },
    /// Unclamped empirical mean; not private.
    EmpiricalMean,
    /// Two-stage histogram estimator with range bound `range_bound`.
    Kv { range_bound: f64 },
}

impl RobustMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            RobustMechanism::LaplaceMean { .. } => "laplace_mean",
            RobustMechanism::EmpiricalMean => "empirical_mean_nonprivate",
            RobustMechanism::Kv { .. } => "kv1d",
        }
    }

    /// Whether the mechanism is differentially private at all.
    pub fn is_private(&self) -> bool {
        !matches!(self, RobustMechanism::EmpiricalMean)
    }

    fn run(&self, rng: &mut crate::noise::StreamRng, data: &Dataset, epsilon: f64) -> Result<f64> {
        let values = data.column(0);
        let n = values.len() as f64;
        match *self {
            RobustMechanism::LaplaceMean { clamp } => {
                let mean = values.iter().map(|v| v.clamp(-clamp, clamp)).sum::<f64>() / n;
                let out = laplace_mechanism(rng, &[mean], 2.0 * clamp / n, PrivacyBudget::pure(epsilon)?)?;
                Ok(out[0])
            }
            RobustMechanism::EmpiricalMean => Ok(values.iter().sum::<f64>() / n),
            RobustMechanism::Kv { range_bound } => {
                kv1d_estimate(rng, &values, &Kv1dParams::new(epsilon, 1.0, range_bound, 0.05)?)
            }
        }
    }
}

impl fmt::Display for RobustMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RobustMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "laplace_mean" | "laplace-mean" => RobustMechanism::LaplaceMean { clamp: 10.0 },
            "empirical_mean" | "empirical-mean" | "empirical_mean_nonprivate" => RobustMechanism::EmpiricalMean,
            "kv1d" | "kv" => RobustMechanism::Kv { range_bound: 1e3 },
            _ => return Err(Error::Parse(format!("unknown mechanism {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCheckConfig {
    pub mechanism: RobustMechanism,
    pub n: usize,
    pub epsilon: f64,
    /// Slack term of approximate DP; zero for pure mechanisms.
    pub delta: f64,
    /// Good set radius; `None` tunes it on pilot runs to `target_beta`.
    pub accuracy_radius: Option<f64>,
    pub target_beta: f64,
    pub pilot_trials: usize,
    pub corruption_counts: Vec<u64>,
    pub trials: usize,
    /// Adversary magnitude (shift length, outlier size).
    pub magnitude: f64,
    pub seed: u64,
}

impl RobustnessCheckConfig {
    pub fn new(mechanism: RobustMechanism) -> Self {
        Self {
            mechanism,
            n: 1000,
            epsilon: 1.0,
            delta: 0.0,
            accuracy_radius: None,
            target_beta: 0.01,
            pilot_trials: 10_000,
            corruption_counts: vec![1, 2, 5],
            trials: 10_000,
            magnitude: 10.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(param("n must be at least 2"));
        }
        if !(self.epsilon > 0.0) || !(0.0..1.0).contains(&self.delta) {
            return Err(param("need epsilon > 0 and delta in [0, 1)"));
        }
        if self.trials < 1000 {
            return Err(param(format!("need at least 1000 trials, got {}", self.trials)));
        }
        if self.accuracy_radius.is_none() && (self.pilot_trials < 100 || !(self.target_beta > 0.0 && self.target_beta < 1.0)) {
            return Err(param("radius tuning needs >= 100 pilot trials and target beta in (0, 1)"));
        }
        if self.corruption_counts.iter().any(|&t| t as usize >= self.n) {
            return Err(param("corruption counts must be below n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub corrupted: u64,
    /// `None` for the clean row.
    pub strategy: Option<ContaminationStrategy>,
    pub observed: f64,
    /// Analytic bound evaluated at the observed clean rate.
    pub bound: f64,
    /// Three binomial standard deviations at the bound.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub mechanism: RobustMechanism,
    pub radius: f64,
    pub clean_rate: f64,
    pub rows: Vec<RobustnessRow>,
    pub records: Vec<TrialRecord>,
}

impl RobustnessReport {
    /// Pass iff every row (hence the worst adversary at each `t`) passes.
    pub fn verdict(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Worst observed failure rate over strategies at `t` corrupted samples.
    pub fn worst_rate(&self, t: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.corrupted == t)
            .map(|r| r.observed)
            .max_by(f64::total_cmp)
    }
}

impl fmt::Display for RobustnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mechanism {}  radius {:.6}  clean failure rate {:.5}", self.mechanism, self.radius, self.clean_rate)?;
        writeln!(f, "{:>4}  {:<18} {:>10} {:>10} {:>10}  verdict", "t", "adversary", "observed", "bound", "slack")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>4}  {:<18} {:>10.5} {:>10.5} {:>10.5}  {}",
                r.corrupted,
                r.strategy.map_or("clean", |s| s.name()),
                r.observed,
                r.bound,
                r.slack,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.verdict() { "PASS" } else { "FAIL" })
    }
}

fn clean_truth() -> GroundTruth {
    GroundTruth::from_mean(vec![0.0], 1.0).expect("valid truth")
}

/// Absolute errors of `trials` runs, with `t` samples replaced by `strategy`.
fn errors(
    cfg: &RobustnessCheckConfig,
    root: RngHandle,
    t: u64,
    strategy: Option<ContaminationStrategy>,
    trials: usize,
) -> Result<Vec<f64>> {
    let truth = clean_truth();
    let label = strategy.map_or("clean", |s| s.name());
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            // the clean draw of trial i is shared by every adversary
            let data = sample_gaussian_dataset(&mut root.derive_indexed("data", i).rng(), &truth, cfg.n)?;
            let data = match strategy {
                Some(s) if t > 0 => {
                    let spec = ContaminationSpec::new(t as f64 / cfg.n as f64, s, cfg.magnitude)?;
                    let mut rng = root.derive_indexed(&format!("adversary/{label}/{t}"), i).rng();
                    contaminate(&mut rng, &data, &truth, &spec)?
                }
                _ => data,
            };
            let mut rng = root.derive_indexed(&format!("mechanism/{label}/{t}"), i).rng();
            Ok(cfg.mechanism.run(&mut rng, &data, cfg.epsilon)?.abs())
        })
        .collect()
}

fn rate(errs: &[f64], radius: f64) -> f64 {
    errs.iter().filter(|&&e| e > radius).count() as f64 / errs.len() as f64
}

/// Estimates the clean failure rate, then the failure rate under every
/// adversary at every corruption count, and compares each with the bound
/// `min(1, e^(eps t) (beta + t delta)) + 3 sqrt(b (1 - b) / trials)`.
/// A zero clean rate is replaced by `3 / trials`.
pub fn run_robustness_check(cfg: &RobustnessCheckConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    let root = RngHandle::new(cfg.seed);
    let radius = match cfg.accuracy_radius {
        Some(r) => r,
        None => {
            let mut pilot = errors(cfg, root.derive("pilot"), 0, None, cfg.pilot_trials)?;
            pilot.sort_by(f64::total_cmp);
            let idx = ((1.0 - cfg.target_beta) * pilot.len() as f64).ceil() as usize;
            pilot[idx.min(pilot.len() - 1)]
        }
    };
    let main = root.derive("main");
    let clean_rate = rate(&errors(cfg, main, 0, None, cfg.trials)?, radius);
    let beta_for_bound = if clean_rate == 0.0 { 3.0 / cfg.trials as f64 } else { clean_rate };
    let trials = cfg.trials as f64;
    let slack_at = |b: f64| 3.0 * (b * (1.0 - b) / trials).sqrt();

    let mut rows = vec![RobustnessRow {
        corrupted: 0,
        strategy: None,
        observed: clean_rate,
        bound: beta_for_bound,
        slack: slack_at(beta_for_bound),
        pass: true,
    }];
    for &t in &cfg.corruption_counts {
        let bound = meta_theorem_failure_bound(beta_for_bound, cfg.epsilon, cfg.delta, t);
        for s in ContaminationStrategy::ALL {
            let observed = if t == 0 { clean_rate } else { rate(&errors(cfg, main, t, Some(s), cfg.trials)?, radius) };
            let slack = slack_at(bound);
            rows.push(RobustnessRow {
                corrupted: t,
                strategy: Some(s),
                observed,
                bound,
                slack,
                pass: observed <= bound + slack,
            });
        }
    }

    let records = rows
        .iter()
        .map(|r| TrialRecord {
            experiment: "robustness_check".to_owned(),
            algorithm: format!("{}/{}", cfg.mechanism.name(), r.strategy.map_or("clean", |s| s.name())),
            sweep_value: r.corrupted as f64,
            seed: cfg.seed,
            metric: Metric::FailureRate,
            value: r.observed,
        })
        .collect();
    Ok(RobustnessReport {
        mechanism: cfg.mechanism,
        radius,
        clean_rate,
        rows,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mechanism: RobustMechanism) -> RobustnessCheckConfig {
        RobustnessCheckConfig {
            trials: 1000,
            pilot_trials: 1000,
            n: 200,
            ..RobustnessCheckConfig::new(mechanism)
        }
    }

    #[test]
    fn zero_corruption_row_passes_trivially() {
        let cfg = RobustnessCheckConfig {
            corruption_counts: vec![0],
            ..quick(RobustMechanism::LaplaceMean { clamp: 10.0 })
        };
        let report = run_robustness_check(&cfg).unwrap();
        assert!(report.verdict());
        assert_eq!(report.worst_rate(0), Some(report.clean_rate));
    }

    #[test]
    fn tuned_radius_hits_target_rate() {
        let report = run_robustness_check(&quick(RobustMechanism::LaplaceMean { clamp: 10.0 })).unwrap();
        assert!((0.0..=0.03).contains(&report.clean_rate), "{}", report.clean_rate);
        assert!(report.verdict(), "{report}");
    }

    #[test]
    fn deterministic() {
        let cfg = quick(RobustMechanism::Kv { range_bound: 100.0 });
        assert_eq!(run_robustness_check(&cfg).unwrap(), run_robustness_check(&cfg).unwrap());
    }

    #[test]
    fn rejects_too_few_trials() {
        let cfg = RobustnessCheckConfig {
            trials: 10,
            ..RobustnessCheckConfig::new(RobustMechanism::EmpiricalMean)
        };
        assert!(run_robustness_check(&cfg).is_err());
    }
}
