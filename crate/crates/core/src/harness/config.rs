use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{param, Error, Result};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "DPSE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Fig1Support,
    Fig2L2,
    RobustnessCheck,
    Custom,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1Support => "fig1_support",
            ExperimentKind::Fig2L2 => "fig2_l2",
            ExperimentKind::RobustnessCheck => "robustness_check",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1_support" => ExperimentKind::Fig1Support,
            "fig2_l2" => ExperimentKind::Fig2L2,
            "robustness_check" => ExperimentKind::RobustnessCheck,
            "custom" => ExperimentKind::Custom,
            _ => return Err(Error::Parse(format!("unknown experiment {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Threshold,
    Cwz,
    SubsetSel,
    Nonprivate,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Threshold,
        Algorithm::Cwz,
        Algorithm::SubsetSel,
        Algorithm::Nonprivate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Threshold => "threshold",
            Algorithm::Cwz => "cwz",
            Algorithm::SubsetSel => "subset_sel",
            Algorithm::Nonprivate => "nonprivate",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "threshold" => Algorithm::Threshold,
            "cwz" => Algorithm::Cwz,
            "subset_sel" | "subset-sel" => Algorithm::SubsetSel,
            "nonprivate" => Algorithm::Nonprivate,
            _ => return Err(Error::Parse(format!("unknown algorithm {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub sigma2: f64,
    pub epsilon: f64,
    /// Non-zero mean coordinates are drawn from `U[-coord_range, coord_range]`.
    pub coord_range: f64,
    pub r_inf_sweep: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    /// Failure probability handed to the estimators.
    pub beta: f64,
    /// Bucket size of the thresholding estimator.
    pub threshold_bucket_size: usize,
    /// Threshold of the thresholding estimator, in units of the bucket-mean
    /// standard deviation.
    pub threshold_sigmas: f64,
    /// Target accuracy of subset selection.
    pub subset_alpha: f64,
    /// Bucket size of subset selection; `None` uses `ceil(25 sigma2 / alpha^2)`.
    pub subset_bucket_size: Option<usize>,
    /// Support-stage projection threshold of subset selection; `None` uses `R / 2`.
    pub subset_threshold: Option<f64>,
    /// Emit wall-clock rows (breaks byte-for-byte determinism).
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn fig1() -> Self {
        Self {
            experiment: ExperimentKind::Fig1Support,
            d: 1000,
            k: 20,
            n: 1500,
            sigma2: 1.0,
            epsilon: 0.5,
            coord_range: 10.0,
            r_inf_sweep: vec![10.0, 20.0, 40.0, 80.0, 160.0],
            seeds: (0..10).collect(),
            algorithms: vec![Algorithm::Threshold, Algorithm::Cwz, Algorithm::Nonprivate],
            bootstrap_resamples: 1000,
            confidence: 0.95,
            beta: 0.1,
            threshold_bucket_size: 1,
            threshold_sigmas: crate::threshold::THRESHOLD_SIGMAS,
            subset_alpha: 1.0,
            subset_bucket_size: None,
            subset_threshold: None,
            record_runtime: false,
        }
    }

    pub fn fig2() -> Self {
        Self {
            experiment: ExperimentKind::Fig2L2,
            n: 1000,
            sigma2: 4.0,
            ..Self::fig1()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig1" | "fig1_support" => Ok(Self::fig1()),
            "fig2" | "fig2_l2" => Ok(Self::fig2()),
            _ => Err(param(format!("unknown preset {name:?}, expected fig1 or fig2"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(param("d and n must be positive"));
        }
        if self.k == 0 || self.k > self.d {
            return Err(param(format!("k must lie in [1, d], got {}", self.k)));
        }
        if !(self.sigma2 > 0.0) || !(self.epsilon > 0.0) || !(self.coord_range >= 0.0) {
            return Err(param("sigma2 and epsilon must be positive, coord_range non-negative"));
        }
        if self.r_inf_sweep.is_empty() || self.r_inf_sweep.iter().any(|r| !(*r > 0.0)) {
            return Err(param("r_inf_sweep must be a non-empty list of positive values"));
        }
        if self.seeds.is_empty() {
            return Err(param("seeds must be non-empty"));
        }
        if self.algorithms.is_empty() {
            return Err(param("algorithms must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.confidence) {
            return Err(param("confidence must lie in [0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(param("beta must lie in (0, 1)"));
        }
        if self.threshold_bucket_size == 0 || !(self.threshold_sigmas > 0.0) || !(self.subset_alpha > 0.0) {
            return Err(param("bucket sizes, threshold and alpha must be positive"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "experiment" => self.experiment = v.parse()?,
            "d" => self.d = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "sigma2" => self.sigma2 = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "coord_range" => self.coord_range = parse(key, v)?,
            "r_inf_sweep" => self.r_inf_sweep = parse_list(key, v)?,
            "seeds" => self.seeds = parse_seeds(v)?,
            "algorithms" => {
                self.algorithms = v
                    .split(',')
                    .map(|a| a.trim().parse())
                    .collect::<Result<_>>()?
            }
            "bootstrap_resamples" => self.bootstrap_resamples = parse(key, v)?,
            "confidence" => self.confidence = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "threshold_bucket_size" => self.threshold_bucket_size = parse(key, v)?,
            "threshold_sigmas" => self.threshold_sigmas = parse(key, v)?,
            "subset_alpha" => self.subset_alpha = parse(key, v)?,
            "subset_bucket_size" => self.subset_bucket_size = parse_optional(key, v)?,
            "subset_threshold" => self.subset_threshold = parse_optional(key, v)?,
            "record_runtime" => self.record_runtime = parse(key, v)?,
            other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every setting of a `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
}

fn parse_optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse(key, x.trim())).collect()
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = parse("seeds", a.trim())?;
            let b: u64 = parse("seeds", b.trim())?;
            out.extend(a..b);
        } else {
            out.push(parse("seeds", part)?);
        }
    }
    Ok(out)
}

/// Seed from [`SEED_ENV`], or `fallback` when unset.
pub fn default_seed(fallback: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{SEED_ENV} must be a decimal integer, got {v:?}"))),
        Err(_) => Ok(fallback),
    }
}
