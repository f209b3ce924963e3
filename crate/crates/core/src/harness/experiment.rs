use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{cwz_peeling_estimate, cwz_peeling_support, nonprivate_baseline, PeelingParams};
use crate::data::{
    format_float, generate_sparse_mean, l2_distance, sample_gaussian_dataset, support_mass_fraction, Dataset,
    GroundTruth,
};
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::records::{sort_records, Metric, TrialRecord};
use crate::noise::RngHandle;
use crate::subset::{subset_selection_estimate, DenseNetParams, SubsetScoreParams, SubsetSelParams};
use crate::threshold::{threshold_estimate, threshold_support, ThresholdParams};

/// A trial that could not run; its metric rows are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub algorithm: Algorithm,
    pub sweep_value: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Sorted by `(experiment, algorithm, sweep_value, seed, metric)`.
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

struct TrialMetrics {
    support_mass: f64,
    l2_error: f64,
}

/// Ground truth and dataset of one seed. The same draw is reused at every
/// sweep value.
pub fn seed_instance(cfg: &ExperimentConfig, seed: u64) -> Result<(GroundTruth, Dataset)> {
    let root = RngHandle::new(seed);
    let truth = generate_sparse_mean(
        &mut root.derive("truth").rng(),
        cfg.d,
        cfg.k,
        cfg.coord_range,
        cfg.sigma2,
    )?;
    let data = sample_gaussian_dataset(&mut root.derive("data").rng(), &truth, cfg.n)?;
    Ok((truth, data))
}

fn threshold_params(cfg: &ExperimentConfig, range_bound: f64) -> Result<ThresholdParams> {
    let b = cfg.threshold_bucket_size;
    let t = cfg.threshold_sigmas * (cfg.sigma2 / b as f64).sqrt();
    Ok(
        ThresholdParams::new(cfg.k, cfg.epsilon, cfg.beta, cfg.sigma2, cfg.subset_alpha, range_bound)?
            .with_bucket_size(b)
            .with_threshold(t),
    )
}

fn subset_params(cfg: &ExperimentConfig, range_bound: f64) -> Result<SubsetSelParams> {
    let alpha = cfg.subset_alpha;
    let b = cfg
        .subset_bucket_size
        .unwrap_or_else(|| (25.0 * cfg.sigma2 / (alpha * alpha)).ceil() as usize)
        .max(1);
    Ok(SubsetSelParams {
        k: cfg.k,
        epsilon: cfg.epsilon,
        bucket_size: b,
        range_bound,
        score: SubsetScoreParams::new(cfg.subset_threshold.unwrap_or(range_bound / 2.0))?,
        net: DenseNetParams::for_accuracy(alpha, cfg.k, (cfg.sigma2 / b as f64).sqrt())?,
    })
}

/// Support-stage metric from a run that spends the whole budget on support
/// selection; error metric from the full estimator.
fn run_trial(
    cfg: &ExperimentConfig,
    alg: Algorithm,
    r_inf: f64,
    truth: &GroundTruth,
    data: &Dataset,
    stream: RngHandle,
) -> Result<TrialMetrics> {
    let r_l2 = (cfg.k as f64).sqrt() * r_inf;
    let mut support_rng = stream.derive("support").rng();
    let mut estimate_rng = stream.derive("estimate").rng();
    let (support, estimate) = match alg {
        Algorithm::Threshold => {
            let p = threshold_params(cfg, r_l2)?;
            let support = threshold_support(&mut support_rng, data, &p)?;
            (support, threshold_estimate(&mut estimate_rng, data, &p)?.estimate)
        }
        Algorithm::Cwz => {
            let p = PeelingParams::new(cfg.k, cfg.epsilon, r_inf)?;
            let support = cwz_peeling_support(&mut support_rng, data, &p)?;
            (support, cwz_peeling_estimate(&mut estimate_rng, data, &p)?.estimate)
        }
        Algorithm::SubsetSel => {
            let out = subset_selection_estimate(&mut estimate_rng, data, &subset_params(cfg, r_l2)?)?;
            (out.support, out.estimate)
        }
        Algorithm::Nonprivate => {
            let out = nonprivate_baseline(data, cfg.k)?;
            (out.support, out.estimate)
        }
    };
    Ok(TrialMetrics {
        support_mass: support_mass_fraction(&support, truth),
        l2_error: l2_distance(&estimate, &truth.mu),
    })
}

/// Runs every (seed, algorithm, sweep value) trial. Output depends only on
/// `cfg` unless runtime rows are requested.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let experiment = cfg.experiment.name();
    let per_seed: Vec<Result<(Vec<TrialRecord>, Vec<TrialFailure>)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (truth, data) = seed_instance(cfg, seed)?;
            let tasks: Vec<(Algorithm, f64)> = cfg
                .algorithms
                .iter()
                .flat_map(|&a| cfg.r_inf_sweep.iter().map(move |&r| (a, r)))
                .collect();
            let results: Vec<(Algorithm, f64, Result<TrialMetrics>, f64)> = tasks
                .into_par_iter()
                .map(|(alg, r)| {
                    let stream = RngHandle::new(seed).derive(&format!("{}/{}", alg.name(), format_float(r)));
                    let start = Instant::now();
                    let res = run_trial(cfg, alg, r, &truth, &data, stream);
                    (alg, r, res, start.elapsed().as_secs_f64())
                })
                .collect();
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for (alg, r, res, secs) in results {
                let row = |metric, value| TrialRecord {
                    experiment: experiment.to_owned(),
                    algorithm: alg.name().to_owned(),
                    sweep_value: r,
                    seed,
                    metric,
                    value,
                };
                let (mass, err) = match res {
                    Ok(m) => (m.support_mass, m.l2_error),
                    Err(e @ (Error::Scale { .. } | Error::Partial { .. })) => {
                        failures.push(TrialFailure {
                            algorithm: alg,
                            sweep_value: r,
                            seed,
                            message: e.to_string(),
                        });
                        (f64::NAN, f64::NAN)
                    }
                    Err(e) => return Err(e),
                };
                records.push(row(Metric::SupportMassFraction, mass));
                records.push(row(Metric::L2Error, err));
                if cfg.record_runtime {
                    records.push(row(Metric::RuntimeSeconds, secs));
                }
            }
            Ok((records, failures))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in per_seed {
        let (rs, fs) = r?;
        records.extend(rs);
        failures.extend(fs);
    }
    sort_records(&mut records);
    failures.sort_by(|a, b| {
        (a.algorithm, a.seed)
            .cmp(&(b.algorithm, b.seed))
            .then(a.sweep_value.total_cmp(&b.sweep_value))
    });
    Ok(ExperimentOutput { records, failures })
}
