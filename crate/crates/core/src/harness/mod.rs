//! Experiment runner, robustness checker, bound report and CSV output.

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod records;
pub mod robustness;
pub mod stats;

pub use bounds::print_bounds;
pub use config::{default_seed, parse_seeds, Algorithm, ExperimentConfig, ExperimentKind, SEED_ENV};
pub use experiment::{run_experiment, seed_instance, ExperimentOutput, TrialFailure};
pub use records::{emit_csv, parse_csv, read_records, sort_records, write_records, Metric, TrialRecord, CSV_HEADER};
pub use robustness::{run_robustness_check, RobustMechanism, RobustnessCheckConfig, RobustnessReport, RobustnessRow};
pub use stats::{bootstrap_ci, mean, median, summarize, Summary};
