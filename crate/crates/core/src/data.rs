//! Datasets, synthetic sparse-mean generation, bucketing, sparsification and
//! the contamination adversaries used to probe robustness.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StudentT};

use crate::error::{param, Error, Result};
use crate::noise::fill_gaussian;

/// `n` samples in `d` dimensions, stored row-major. Row order is significant:
/// neighbouring datasets differ in one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(param("dataset dimension must be at least 1"));
        }
        if values.len() != n * d {
            return Err(param(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("dataset entries must be finite"));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(param("all rows must have equal length"));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// Replaces row `i`; used to build neighbouring datasets.
    pub fn set_row(&mut self, i: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.d || i >= self.n {
            return Err(param("row index or length out of range"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(param("dataset entries must be finite"));
        }
        self.values[i * self.d..(i + 1) * self.d].copy_from_slice(row);
        Ok(())
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn empirical_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// One sample per line, `d` comma-separated columns, no header,
    /// 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// The sparse mean and noise level behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mu: Vec<f64>,
    pub k: usize,
    pub sigma2: f64,
    /// Sorted indices of the non-zero coordinates of `mu`.
    pub support: Vec<usize>,
}

impl GroundTruth {
    /// Builds the record from an explicit mean; `k` is set to its support size.
    pub fn from_mean(mu: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(param(format!("sigma2 must be non-negative, got {sigma2}")));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(param("mean must be finite"));
        }
        let support: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] != 0.0).collect();
        Ok(Self {
            k: support.len(),
            mu,
            sigma2,
            support,
        })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.mu)
    }
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Draws a `k`-sparse mean: uniform random support, non-zero coordinates
/// i.i.d. uniform on `[-coord_range, coord_range]`.
pub fn generate_sparse_mean<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    k: usize,
    coord_range: f64,
    sigma2: f64,
) -> Result<GroundTruth> {
    if k > d {
        return Err(param(format!("sparsity k={k} exceeds dimension d={d}")));
    }
    if !(coord_range >= 0.0) || !(sigma2 >= 0.0) {
        return Err(param("coord_range and sigma2 must be non-negative"));
    }
    let mut support = sample_indices(rng, d, k).into_vec();
    support.sort_unstable();
    let mut mu = vec![0.0; d];
    for &i in &support {
        mu[i] = rng.random_range(-coord_range..=coord_range);
    }
    Ok(GroundTruth {
        mu,
        k,
        sigma2,
        support,
    })
}

/// `n` i.i.d. draws from `N(mu, sigma2 * I)`.
pub fn sample_gaussian_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    truth: &GroundTruth,
    n: usize,
) -> Result<Dataset> {
    let d = truth.d();
    let sd = truth.sigma2.sqrt();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let start = values.len();
        values.extend_from_slice(&truth.mu);
        fill_gaussian(rng, &mut values[start..], sd);
    }
    Dataset::new(n, d, values)
}

/// `n` i.i.d. draws of `mu + sigma * t / sqrt(dof / (dof - 2))` with independent
/// Student-t coordinates, so each coordinate has variance `sigma2`.
pub fn sample_student_t_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    truth: &GroundTruth,
    n: usize,
    dof: f64,
) -> Result<Dataset> {
    if !(dof > 2.0) {
        return Err(param(format!("Student-t needs dof > 2 for finite variance, got {dof}")));
    }
    let t = StudentT::new(dof).map_err(|e| param(e.to_string()))?;
    let scale = truth.sigma2.sqrt() * ((dof - 2.0) / dof).sqrt();
    let mut values = Vec::with_capacity(n * truth.d());
    for _ in 0..n {
        values.extend(truth.mu.iter().map(|m| m + scale * t.sample(rng)));
    }
    Dataset::new(n, truth.d(), values)
}

/// Draws a sparse mean and then `n` Gaussian samples around it.
pub fn generate_sparse_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    k: usize,
    coord_range: f64,
    sigma2: f64,
    n: usize,
) -> Result<(GroundTruth, Dataset)> {
    if n == 0 {
        return Err(param("n must be at least 1"));
    }
    let truth = generate_sparse_mean(rng, d, k, coord_range, sigma2)?;
    let data = sample_gaussian_dataset(rng, &truth, n)?;
    Ok((truth, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContaminationStrategy {
    /// Moves the samples least aligned with the support direction `u` to `mu + M u`.
    ShiftCluster,
    /// Replaces the samples most aligned with `mu` by fresh draws around `-mu`.
    SignFlipSupport,
    /// Replaces random samples by `M e_j` for one random off-support coordinate `j`.
    HeavyOutlier,
}

impl ContaminationStrategy {
    pub const ALL: [ContaminationStrategy; 3] = [
        ContaminationStrategy::ShiftCluster,
        ContaminationStrategy::SignFlipSupport,
        ContaminationStrategy::HeavyOutlier,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ShiftCluster => "shift_cluster",
            Self::SignFlipSupport => "sign_flip_support",
            Self::HeavyOutlier => "heavy_outlier",
        }
    }
}

impl std::str::FromStr for ContaminationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift_cluster" => Ok(Self::ShiftCluster),
            "sign_flip_support" => Ok(Self::SignFlipSupport),
            "heavy_outlier" => Ok(Self::HeavyOutlier),
            other => Err(param(format!("unknown contamination strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    eta: f64,
    pub strategy: ContaminationStrategy,
    pub magnitude: f64,
}

impl ContaminationSpec {
    pub fn new(eta: f64, strategy: ContaminationStrategy, magnitude: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(param(format!("eta must lie in [0, 1), got {eta}")));
        }
        if !magnitude.is_finite() {
            return Err(param("magnitude must be finite"));
        }
        Ok(Self {
            eta,
            strategy,
            magnitude,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `floor(eta * n)`.
    pub fn corrupted_count(&self, n: usize) -> usize {
        ((self.eta * n as f64) * (1.0 + 1e-12)).floor() as usize
    }
}

/// Unit vector on the true support with signs matching `mu`, or `e_0` when
/// the support is empty.
pub fn support_direction(truth: &GroundTruth) -> Vec<f64> {
    let mut u = vec![0.0; truth.d()];
    if truth.support.is_empty() {
        u[0] = 1.0;
        return u;
    }
    let w = 1.0 / (truth.support.len() as f64).sqrt();
    for &i in &truth.support {
        u[i] = if truth.mu[i] < 0.0 { -w } else { w };
    }
    u
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the `t` rows with the smallest key; ties resolve by index.
fn lowest_keys(keys: &[f64], t: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx.truncate(t);
    idx
}

/// Replaces exactly `floor(eta * n)` rows according to the adversary strategy.
/// All other rows are left untouched.
pub fn contaminate<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    truth: &GroundTruth,
    spec: &ContaminationSpec,
) -> Result<Dataset> {
    if truth.d() != data.d() {
        return Err(param("ground truth and dataset dimensions differ"));
    }
    let t = spec.corrupted_count(data.n());
    let mut out = data.clone();
    if t == 0 {
        return Ok(out);
    }
    let d = data.d();
    match spec.strategy {
        ContaminationStrategy::ShiftCluster => {
            let u = support_direction(truth);
            let keys: Vec<f64> = data
                .rows()
                .map(|r| dot(r, &u) - dot(&truth.mu, &u))
                .collect();
            let target: Vec<f64> = truth
                .mu
                .iter()
                .zip(&u)
                .map(|(m, ui)| m + spec.magnitude * ui)
                .collect();
            for i in lowest_keys(&keys, t) {
                out.set_row(i, &target)?;
            }
        }
        ContaminationStrategy::SignFlipSupport => {
            let keys: Vec<f64> = data.rows().map(|r| -dot(r, &truth.mu)).collect();
            let sd = truth.sigma2.sqrt();
            let mut row = vec![0.0; d];
            for i in lowest_keys(&keys, t) {
                row.iter_mut().zip(&truth.mu).for_each(|(r, m)| *r = -m);
                fill_gaussian(rng, &mut row, sd);
                out.set_row(i, &row)?;
            }
        }
        ContaminationStrategy::HeavyOutlier => {
            let off: Vec<usize> = (0..d).filter(|i| truth.mu[*i] == 0.0).collect();
            let j = if off.is_empty() {
                rng.random_range(0..d)
            } else {
                off[rng.random_range(0..off.len())]
            };
            let mut row = vec![0.0; d];
            row[j] = spec.magnitude;
            for i in sample_indices(rng, data.n(), t) {
                out.set_row(i, &row)?;
            }
        }
    }
    Ok(out)
}

/// Means of consecutive, disjoint blocks of `b` samples; the trailing
/// `n mod b` samples are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketedDataset {
    bucket_size: usize,
    count: usize,
    d: usize,
    means: Vec<f64>,
}

impl BucketedDataset {
    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    /// Number of buckets, `floor(n / b)`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        &self.means[j * self.d..(j + 1) * self.d]
    }

    pub fn means(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.means.chunks_exact(self.d)
    }

    /// Coordinate `i` of every bucket mean.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.means().map(|m| m[i]).collect()
    }

    /// Bucket means projected onto the coordinates in `subset`, in subset order.
    pub fn restrict(&self, subset: &[usize]) -> Vec<Vec<f64>> {
        self.means()
            .map(|m| subset.iter().map(|&i| m[i]).collect())
            .collect()
    }
}

pub fn bucket_means(data: &Dataset, b: usize) -> Result<BucketedDataset> {
    if b == 0 || b > data.n() {
        return Err(param(format!(
            "bucket size must lie in [1, n={}], got {b}",
            data.n()
        )));
    }
    let count = data.n() / b;
    let d = data.d();
    let mut means = vec![0.0; count * d];
    let inv = 1.0 / b as f64;
    for (j, out) in means.chunks_exact_mut(d).enumerate() {
        for i in j * b..(j + 1) * b {
            for (o, v) in out.iter_mut().zip(data.row(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o *= inv);
    }
    Ok(BucketedDataset {
        bucket_size: b,
        count,
        d,
        means,
    })
}

/// Keeps the `k` largest-magnitude coordinates of `x` and zeroes the rest.
/// Magnitude ties are broken uniformly at random.
pub fn sparsify<R: Rng + ?Sized>(x: &[f64], k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k > x.len() {
        return Err(param(format!("k={k} exceeds length {}", x.len())));
    }
    let mut order: Vec<(usize, u64)> = (0..x.len()).map(|i| (i, rng.random())).collect();
    order.sort_by(|a, b| {
        x[b.0]
            .abs()
            .total_cmp(&x[a.0].abs())
            .then(a.1.cmp(&b.1))
    });
    let mut out = vec![0.0; x.len()];
    for &(i, _) in &order[..k] {
        out[i] = x[i];
    }
    Ok(out)
}

/// `||mu_T||^2 / ||mu||^2` for the selected coordinates `T`; 1 when `mu = 0`.
pub fn support_mass_fraction(estimate_support: &[usize], truth: &GroundTruth) -> f64 {
    let total: f64 = truth.mu.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 1.0;
    }
    let mut seen = vec![false; truth.d()];
    let mut captured = 0.0;
    for &i in estimate_support {
        if i < truth.d() && !seen[i] {
            seen[i] = true;
            captured += truth.mu[i] * truth.mu[i];
        }
    }
    captured / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngHandle;
    use proptest::prelude::*;

    fn rng(seed: u64) -> crate::noise::StreamRng {
        RngHandle::new(seed).rng()
    }

    #[test]
    fn k_zero_gives_zero_mean() {
        let (truth, data) = generate_sparse_gaussian(&mut rng(1), 20, 0, 10.0, 1.0, 50).unwrap();
        assert!(truth.mu.iter().all(|&v| v == 0.0));
        assert!(truth.support.is_empty());
        assert_eq!((data.n(), data.d()), (50, 20));
    }

    #[test]
    fn k_above_d_is_rejected() {
        assert!(generate_sparse_gaussian(&mut rng(1), 5, 6, 10.0, 1.0, 10).is_err());
    }

    #[test]
    fn zero_variance_samples_equal_mean() {
        let (truth, data) = generate_sparse_gaussian(&mut rng(2), 30, 5, 10.0, 0.0, 10).unwrap();
        for row in data.rows() {
            assert_eq!(row, truth.mu.as_slice());
        }
        assert_eq!(truth.support.len(), 5);
        assert!(truth.mu.iter().all(|v| v.abs() <= 10.0));
    }

    #[test]
    fn mean_norm_second_moment() {
        let mut r = rng(3);
        let draws = 1000;
        let total: f64 = (0..draws)
            .map(|_| {
                let t = generate_sparse_mean(&mut r, 1000, 20, 10.0, 1.0).unwrap();
                t.norm().powi(2)
            })
            .sum();
        let avg = total / draws as f64;
        assert!((640.0..=693.0).contains(&avg), "E||mu||^2 ~ {avg}");
    }

    #[test]
    fn contamination_count_contract() {
        let (truth, data) = generate_sparse_gaussian(&mut rng(4), 8, 2, 5.0, 1.0, 100).unwrap();
        for strategy in ContaminationStrategy::ALL {
            let none = ContaminationSpec::new(0.0, strategy, 50.0).unwrap();
            assert_eq!(contaminate(&mut rng(5), &data, &truth, &none).unwrap(), data);
            let spec = ContaminationSpec::new(0.1, strategy, 50.0).unwrap();
            let out = contaminate(&mut rng(5), &data, &truth, &spec).unwrap();
            let changed = (0..100).filter(|&i| out.row(i) != data.row(i)).count();
            assert_eq!(changed, 10, "{strategy:?}");
        }
        assert!(ContaminationSpec::new(1.0, ContaminationStrategy::ShiftCluster, 1.0).is_err());
    }

    #[test]
    fn shift_cluster_moves_mean_along_support() {
        // Mean shift is eta * M * u plus the removed tail; with M = 1000 the
        // tail term is negligible next to the 3-sigma Monte-Carlo band.
        let (truth, data) = generate_sparse_gaussian(&mut rng(6), 6, 2, 5.0, 1.0, 2000).unwrap();
        let spec = ContaminationSpec::new(0.05, ContaminationStrategy::ShiftCluster, 1000.0).unwrap();
        let out = contaminate(&mut rng(7), &data, &truth, &spec).unwrap();
        let u = support_direction(&truth);
        let before = data.empirical_mean();
        let after = out.empirical_mean();
        let shift: f64 = after.iter().zip(&before).zip(&u).map(|((a, b), ui)| (a - b) * ui).sum();
        let expected = 0.05 * 1000.0;
        let mc_sd = 3.0 * (1.0 / 2000f64).sqrt() + 0.05 * 3.0;
        assert!((shift - expected).abs() <= 3.0 * mc_sd, "shift {shift}");
    }

    #[test]
    fn bucket_means_edge_cases() {
        let (_, data) = generate_sparse_gaussian(&mut rng(8), 4, 1, 5.0, 1.0, 10).unwrap();
        let b1 = bucket_means(&data, 1).unwrap();
        for j in 0..10 {
            assert_eq!(b1.mean(j), data.row(j));
        }
        let bn = bucket_means(&data, 10).unwrap();
        assert_eq!(bn.len(), 1);
        for (a, b) in bn.mean(0).iter().zip(data.empirical_mean()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(bucket_means(&data, 3).unwrap().len(), 3);
        assert!(bucket_means(&data, 11).is_err());
        assert!(bucket_means(&data, 0).is_err());
    }

    #[test]
    fn bucket_means_variance_reduction() {
        // pooled over 20 independent N(0, 1) coordinates, 100 bucket means each
        let truth = GroundTruth::from_mean(vec![0.0; 20], 1.0).unwrap();
        let data = sample_gaussian_dataset(&mut rng(9), &truth, 2500).unwrap();
        let bd = bucket_means(&data, 25).unwrap();
        let mut ss = 0.0;
        let mut dof = 0;
        for i in 0..20 {
            let xs = bd.coordinate(i);
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            ss += xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
            dof += xs.len() - 1;
        }
        let v = ss / dof as f64;
        assert!((0.033..=0.047).contains(&v), "variance {v}");
    }

    #[test]
    fn sparsify_examples() {
        let mut r = rng(10);
        assert_eq!(sparsify(&[3.0, -2.0, 1.0], 1, &mut r).unwrap(), vec![3.0, 0.0, 0.0]);
        let x = [0.0, 4.0, 0.0, -1.0];
        assert_eq!(sparsify(&x, 2, &mut r).unwrap(), x.to_vec());
        assert!(sparsify(&x, 5, &mut r).is_err());
    }

    #[test]
    fn sparsify_ties_are_random() {
        let mut r = rng(11);
        let picks: Vec<usize> = (0..200)
            .map(|_| {
                let out = sparsify(&[1.0, -1.0, 1.0], 1, &mut r).unwrap();
                out.iter().position(|v| *v != 0.0).unwrap()
            })
            .collect();
        for i in 0..3 {
            assert!(picks.contains(&i));
        }
    }

    #[test]
    fn support_mass_examples() {
        let truth = GroundTruth::from_mean(vec![3.0, 4.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(support_mass_fraction(&[0, 1, 3], &truth), 1.0);
        assert_eq!(support_mass_fraction(&[2, 3], &truth), 0.0);
        assert!((support_mass_fraction(&[1], &truth) - 0.64).abs() < 1e-15);
        let zero = GroundTruth::from_mean(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(support_mass_fraction(&[], &zero), 1.0);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let (_, data) = generate_sparse_gaussian(&mut rng(12), 3, 1, 5.0, 1.0, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains('\r'));
        assert_eq!(Dataset::read_csv(&path).unwrap(), data);
    }

    proptest! {
        #[test]
        fn sparsify_within_factor_four(
            x in proptest::collection::vec(-10.0f64..10.0, 20),
            y_vals in proptest::collection::vec(-10.0f64..10.0, 20),
            k in 1usize..=10,
            seed in any::<u64>(),
        ) {
            let mut r = rng(seed);
            let mut y = vec![0.0; 20];
            for i in sample_indices(&mut r, 20, k) {
                y[i] = y_vals[i];
            }
            let xs = sparsify(&x, k, &mut r).unwrap();
            prop_assert!(xs.iter().filter(|v| **v != 0.0).count() <= k);
            prop_assert!(l2_distance(&xs, &y) <= 4.0 * l2_distance(&x, &y) + 1e-12);
        }

        #[test]
        fn sparsify_idempotent(x in proptest::collection::vec(-5.0f64..5.0, 1..30), seed in any::<u64>()) {
            let k = x.len() / 2;
            let mut r = rng(seed);
            let once = sparsify(&x, k, &mut r).unwrap();
            let twice = sparsify(&once, k, &mut r).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn bucket_means_translation_equivariant(
            rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 4..20),
            c in proptest::collection::vec(-100.0f64..100.0, 3),
            b in 1usize..4,
        ) {
            let data = Dataset::from_rows(&rows).unwrap();
            let shifted_rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().zip(&c).map(|(a, s)| a + s).collect())
                .collect();
            let shifted = Dataset::from_rows(&shifted_rows).unwrap();
            let a = bucket_means(&data, b).unwrap();
            let s = bucket_means(&shifted, b).unwrap();
            for (ma, ms) in a.means().zip(s.means()) {
                for ((x, y), ci) in ma.iter().zip(ms).zip(&c) {
                    prop_assert!((x + ci - y).abs() < 1e-9);
                }
            }
        }
    }
}
