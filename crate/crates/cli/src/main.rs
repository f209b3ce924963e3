use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dpse_core::baselines::{cwz_peeling_estimate, nonprivate_baseline, PeelingParams};
use dpse_core::data::{format_float, generate_sparse_gaussian, Dataset};
use dpse_core::harness::{
    default_seed, emit_csv, parse_seeds, print_bounds, run_experiment, run_robustness_check, summarize, Algorithm,
    ExperimentConfig, Metric, RobustMechanism, RobustnessCheckConfig,
};
use dpse_core::noise::RngHandle;
use dpse_core::subset::{subset_selection_estimate, DenseNetParams, SubsetScoreParams, SubsetSelParams};
use dpse_core::threshold::{threshold_estimate, ThresholdParams};

#[derive(Parser)]
#[command(name = "dpse", version, about = "Private, robust sparse mean estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sparse Gaussian dataset as headerless CSV.
    Gen {
        #[arg(long, default_value_t = 1000)]
        d: usize,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 1500)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 10.0)]
        coord_range: f64,
        /// Defaults to $DPSE_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true mean, one value per line.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Run one estimator on a dataset and write `coordinate,value` rows.
    Estimate {
        #[arg(long, value_parser = parse_alg)]
        alg: Algorithm,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: usize,
        /// A priori bound on the largest mean coordinate; l2 estimators use sqrt(k) times this.
        #[arg(long)]
        r_inf: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        /// Bucket size (threshold: auto rule when omitted; subset-sel: ceil(25 sigma2 / alpha^2)).
        #[arg(long)]
        bucket_size: Option<usize>,
        /// Target accuracy for the automatic rules.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Support-stage projection threshold of subset-sel (default R / 2).
        #[arg(long)]
        subset_threshold: Option<f64>,
    },
    /// Run a figure preset and write per-trial CSV rows.
    Experiment {
        #[arg(long, default_value = "fig1")]
        preset: String,
        /// key = value file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Individual key=value overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated seeds or a..b ranges.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Do not print the per-algorithm summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Monte-Carlo check of the corruption failure bound.
    Robustness {
        #[arg(long, default_value = "laplace_mean")]
        mech: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Good-set radius; tuned on pilot runs when omitted.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        target_beta: f64,
        #[arg(long, default_value_t = 10.0)]
        magnitude: f64,
        /// Corruption counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
        t: Vec<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the tolerable corruption fraction and failure bounds.
    Bounds {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        n: u64,
    },
}

fn parse_alg(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: dpse_core::Error| e.to_string())
}

fn seed_or_default(seed: Option<u64>) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None => Ok(default_seed(0)?),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            d,
            k,
            n,
            sigma2,
            coord_range,
            seed,
            out,
            truth_out,
        } => {
            let seed = seed_or_default(seed)?;
            let mut rng = RngHandle::new(seed).derive("gen").rng();
            let (truth, data) = generate_sparse_gaussian(&mut rng, d, k, coord_range, sigma2, n)?;
            data.write_csv(&out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = truth_out {
                let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                for v in &truth.mu {
                    writeln!(f, "{}", format_float(*v))?;
                }
            }
        }
        Command::Estimate {
            alg,
            eps,
            k,
            r_inf,
            seed,
            input,
            out,
            sigma2,
            beta,
            bucket_size,
            alpha,
            subset_threshold,
        } => {
            let seed = seed_or_default(seed)?;
            let data = Dataset::read_csv(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut rng = RngHandle::new(seed).derive("estimate").rng();
            let r_l2 = (k as f64).sqrt() * r_inf;
            let (estimate, support) = match alg {
                Algorithm::Threshold => {
                    let mut p = ThresholdParams::new(k, eps, beta, sigma2, alpha, r_l2)?;
                    if let Some(b) = bucket_size {
                        p = p.with_bucket_size(b);
                    }
                    let o = threshold_estimate(&mut rng, &data, &p)?;
                    (o.estimate, o.support)
                }
                Algorithm::Cwz => {
                    let o = cwz_peeling_estimate(&mut rng, &data, &PeelingParams::new(k, eps, r_inf)?)?;
                    (o.estimate, o.support)
                }
                Algorithm::SubsetSel => {
                    let b = bucket_size.unwrap_or((25.0 * sigma2 / (alpha * alpha)).ceil() as usize);
                    let p = SubsetSelParams {
                        k,
                        epsilon: eps,
                        bucket_size: b.max(1),
                        range_bound: r_l2,
                        score: SubsetScoreParams::new(subset_threshold.unwrap_or(r_l2 / 2.0))?,
                        net: DenseNetParams::for_accuracy(alpha, k, (sigma2 / b.max(1) as f64).sqrt())?,
                    };
                    let o = subset_selection_estimate(&mut rng, &data, &p)?;
                    (o.estimate, o.support)
                }
                Algorithm::Nonprivate => {
                    let o = nonprivate_baseline(&data, k)?;
                    (o.estimate, o.support)
                }
            };
            let mut f = std::io::BufWriter::new(std::fs::File::create(&out)?);
            writeln!(f, "coordinate,value")?;
            for (i, v) in estimate.iter().enumerate() {
                writeln!(f, "{i},{}", format_float(*v))?;
            }
            eprintln!("support: {support:?}");
        }
        Command::Experiment {
            preset,
            config,
            overrides,
            seeds,
            out,
            quiet,
        } => {
            let mut cfg = ExperimentConfig::preset(&preset)?;
            if let Some(path) = config {
                cfg.apply_file(&path).with_context(|| format!("reading {}", path.display()))?;
            }
            for o in &overrides {
                let Some((key, value)) = o.split_once('=') else {
                    bail!("override {o:?} is not key=value");
                };
                cfg.set(key, value)?;
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            let output = run_experiment(&cfg)?;
            emit_csv(&output.records, &out).with_context(|| format!("writing {}", out.display()))?;
            for f in &output.failures {
                eprintln!("{} at R_inf={} seed {}: {}", f.algorithm, f.sweep_value, f.seed, f.message);
            }
            if !quiet {
                for metric in [Metric::SupportMassFraction, Metric::L2Error] {
                    println!("{metric}");
                    println!("{:<12} {:>8} {:>10} {:>10} {:>22}", "algorithm", "R_inf", "mean", "median", "bootstrap CI");
                    for s in summarize(&output.records, metric, cfg.bootstrap_resamples, cfg.confidence) {
                        println!(
                            "{:<12} {:>8} {:>10.4} {:>10.4}   [{:.4}, {:.4}]",
                            s.algorithm, s.sweep_value, s.mean, s.median, s.ci_low, s.ci_high
                        );
                    }
                }
            }
        }
        Command::Robustness {
            mech,
            trials,
            out,
            n,
            eps,
            delta,
            radius,
            target_beta,
            magnitude,
            t,
            seed,
        } => {
            let cfg = RobustnessCheckConfig {
                n,
                epsilon: eps,
                delta,
                accuracy_radius: radius,
                target_beta,
                corruption_counts: t,
                trials,
                magnitude,
                seed: seed_or_default(seed)?,
                ..RobustnessCheckConfig::new(mech.parse::<RobustMechanism>()?)
            };
            let report = run_robustness_check(&cfg)?;
            println!("{report}");
            if let Some(path) = out {
                emit_csv(&report.records, &path)?;
            }
            if !report.verdict() {
                std::process::exit(2);
            }
        }
        Command::Bounds { beta, eps, delta, n } => {
            print!("{}", print_bounds(beta, eps, delta, n)?);
        }
    }
    Ok(())
}
