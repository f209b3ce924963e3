use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::data::format_float;
use crate::error::{Error, Result};

/// Exact CSV header of experiment output.
pub const CSV_HEADER: [&str; 6] = ["experiment", "algorithm", "sweep_value", "seed", "metric", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    FailureRate,
    L2Error,
    RuntimeSeconds,
    SupportMassFraction,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::FailureRate => "failure_rate",
            Metric::L2Error => "l2_error",
            Metric::RuntimeSeconds => "runtime_seconds",
            Metric::SupportMassFraction => "support_mass_fraction",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "failure_rate" => Metric::FailureRate,
            "l2_error" => Metric::L2Error,
            "runtime_seconds" => Metric::RuntimeSeconds,
            "support_mass_fraction" => Metric::SupportMassFraction,
            _ => return Err(Error::Parse(format!("unknown metric {s:?}"))),
        })
    }
}

/// One row of output: a single metric of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: String,
    pub algorithm: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub metric: Metric,
    pub value: f64,
}

impl TrialRecord {
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then_with(|| self.algorithm.cmp(&other.algorithm))
            .then_with(|| self.sweep_value.total_cmp(&other.sweep_value))
            .then_with(|| self.seed.cmp(&other.seed))
            .then_with(|| self.metric.name().cmp(other.metric.name()))
    }
}

/// Sorts by `(experiment, algorithm, sweep_value, seed, metric)`.
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(TrialRecord::sort_key_cmp);
}

pub fn write_records<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.as_str(),
            r.algorithm.as_str(),
            &format_float(r.sweep_value),
            &r.seed.to_string(),
            r.metric.name(),
            &format_float(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records` in the order given; callers sort first for stable output.
pub fn emit_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(records, std::io::BufWriter::new(file))
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(TrialRecord {
            experiment: row[0].to_owned(),
            algorithm: row[1].to_owned(),
            sweep_value: parse_float(&row[2])?,
            seed: row[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed {:?}", &row[3])))?,
            metric: row[4].parse()?,
            value: parse_float(&row[5])?,
        });
    }
    Ok(out)
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    read_records(std::fs::File::open(path)?)
}
