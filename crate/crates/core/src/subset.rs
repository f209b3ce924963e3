//! Exponential-time sparse mean estimation for bounded-covariance data.
//!
//! The estimator runs three exponential mechanisms on bucketed means, each
//! with a third of the budget:
//!
//! 1. over all `k`-subsets `T`, scored by the largest number of bucket means
//!    whose projection onto a unit direction in `R^T` reaches `L`;
//! 2. over a spacing-1 lattice in the radius-`R` ball of `R^k`, scored by
//!    minus the number of bucket means at distance at least `L_coarse`;
//! 3. over a fine lattice in the radius-`sqrt(k)` ball around the coarse
//!    estimate, scored by minus the directional outlier count at `L_fine`.
//!
//! The maximisation over unit vectors is taken over a finite
//! [`DirectionSet`] that is drawn independently of the data: signed axes,
//! signed diagonals and uniformly random directions. Every per-direction
//! count moves by at most one when a single sample changes, so the maximum
//! does too and each score keeps sensitivity 1. For `k = 1` the set is
//! `{+1, -1}` and the score is exact.
//!
//! Subset enumeration and lattice sizes are guarded; exceeding a guard is an
//! [`Error::Scale`], never a silent truncation.

use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{bucket_means, BucketedDataset, Dataset};
use crate::error::{param, Error, Result};
use crate::mechanisms::{sample_exponential_index, BudgetLedger, PrivacyBudget};

/// Default cap on enumerated subsets and lattice points.
pub const DEFAULT_SCALE_LIMIT: u128 = 1_000_000;
/// Signed diagonals are included up to this dimension.
const MAX_DIAGONAL_DIM: usize = 10;

/// Data-independent unit directions in `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    k: usize,
    dirs: Vec<f64>,
}

impl DirectionSet {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, k: usize, n_random: usize) -> Result<Self> {
        if k == 0 {
            return Err(param("direction set needs k >= 1"));
        }
        let mut dirs = Vec::new();
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; k];
                v[j] = sign;
                dirs.extend(v);
            }
        }
        if k == 1 {
            return Ok(Self { k, dirs });
        }
        if k <= MAX_DIAGONAL_DIM {
            let w = 1.0 / (k as f64).sqrt();
            for mask in 0u32..(1 << k) {
                dirs.extend((0..k).map(|j| if mask >> j & 1 == 1 { -w } else { w }));
            }
        }
        for _ in 0..n_random {
            let mut v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            dirs.extend(v);
        }
        Ok(Self { k, dirs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.dirs.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.chunks_exact(self.k)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-direction sorted projections of a point cloud, so that
/// `#{i : <p_i - x, v> >= L}` is a binary search.
struct Projections {
    sorted: Vec<Vec<f64>>,
}

impl Projections {
    fn new(points: &[Vec<f64>], dirs: &DirectionSet) -> Self {
        let sorted = dirs
            .iter()
            .map(|v| {
                let mut p: Vec<f64> = points.iter().map(|x| dot(x, v)).collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        Self { sorted }
    }

    /// `max_v #{i : <p_i - x, v> >= level}`.
    fn max_count(&self, dirs: &DirectionSet, x: Option<&[f64]>, level: f64) -> u64 {
        self.sorted
            .iter()
            .zip(dirs.iter())
            .map(|(proj, v)| {
                let cut = level + x.map_or(0.0, |x| dot(x, v));
                (proj.len() - proj.partition_point(|&p| p < cut)) as u64
            })
            .max()
            .unwrap_or(0)
    }
}

/// `max_{v in dirs} #{i : <p_i - x, v> >= level}` computed directly.
pub fn directional_count(points: &[Vec<f64>], x: Option<&[f64]>, dirs: &DirectionSet, level: f64) -> u64 {
    dirs.iter()
        .map(|v| {
            let shift = x.map_or(0.0, |x| dot(x, v));
            points.iter().filter(|p| dot(p, v) - shift >= level).count() as u64
        })
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetScoreParams {
    /// Projection threshold `L`.
    pub threshold: f64,
    pub n_random_dirs: usize,
    pub scale_limit: u128,
}

impl SubsetScoreParams {
    pub fn new(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(param("score threshold must be finite"));
        }
        Ok(Self {
            threshold,
            n_random_dirs: 256,
            scale_limit: DEFAULT_SCALE_LIMIT,
        })
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Directional score of subset `T` on the bucket means.
pub fn subset_score(bd: &BucketedDataset, subset: &[usize], dirs: &DirectionSet, threshold: f64) -> Result<u64> {
    if subset.len() != dirs.k() {
        return Err(param(format!(
            "subset has {} coordinates, directions live in dimension {}",
            subset.len(),
            dirs.k()
        )));
    }
    if subset.iter().any(|&i| i >= bd.d()) {
        return Err(param("subset index out of range"));
    }
    Ok(directional_count(&bd.restrict(subset), None, dirs, threshold))
}

fn check_subset_scale(d: usize, k: usize, limit: u128) -> Result<()> {
    let required = binomial(d, k);
    if required > limit {
        return Err(Error::Scale {
            what: "k-subsets",
            required,
            limit,
        });
    }
    Ok(())
}

/// Scores of every `k`-subset in lexicographic order.
pub fn score_all_subsets(
    bd: &BucketedDataset,
    k: usize,
    dirs: &DirectionSet,
    p: &SubsetScoreParams,
) -> Result<(Vec<Vec<usize>>, Vec<u64>)> {
    if k == 0 || k > bd.d() {
        return Err(param(format!("k must lie in [1, d={}], got {k}", bd.d())));
    }
    check_subset_scale(bd.d(), k, p.scale_limit)?;
    let subsets: Vec<Vec<usize>> = (0..bd.d()).combinations(k).collect();
    let scores = subsets
        .par_iter()
        .map(|t| directional_count(&bd.restrict(t), None, dirs, p.threshold))
        .collect();
    Ok((subsets, scores))
}

/// Exponential mechanism (sensitivity 1) over all `k`-subsets.
pub fn select_subset<R: Rng + ?Sized>(
    rng: &mut R,
    bd: &BucketedDataset,
    k: usize,
    dirs: &DirectionSet,
    p: &SubsetScoreParams,
    epsilon: f64,
) -> Result<Vec<usize>> {
    if !(epsilon > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon}")));
    }
    let (subsets, scores) = score_all_subsets(bd, k, dirs, p)?;
    let scores: Vec<f64> = scores.into_iter().map(|s| s as f64).collect();
    let pick = sample_exponential_index(rng, &scores, 1.0, epsilon);
    Ok(subsets[pick].clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseNetParams {
    pub coarse_spacing: f64,
    pub fine_spacing: f64,
    pub l_coarse: f64,
    pub l_fine: f64,
    pub net_limit: u128,
}

impl DenseNetParams {
    /// Spacing 1 coarse lattice with `L_coarse = 1`, and a fine lattice of
    /// spacing `alpha / sqrt(k)` with `L_fine = 2 bucket_sd`, i.e. threshold 2
    /// once the bucket means are rescaled to unit covariance.
    pub fn for_accuracy(alpha: f64, k: usize, bucket_sd: f64) -> Result<Self> {
        if !(alpha > 0.0) || k == 0 || !(bucket_sd > 0.0) {
            return Err(param("need alpha > 0, k >= 1 and a positive bucket-mean sd"));
        }
        Ok(Self {
            coarse_spacing: 1.0,
            fine_spacing: alpha / (k as f64).sqrt(),
            l_coarse: 1.0,
            l_fine: 2.0 * bucket_sd,
            net_limit: DEFAULT_SCALE_LIMIT,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.coarse_spacing > 0.0 && self.fine_spacing > 0.0) {
            return Err(param("lattice spacings must be positive"));
        }
        if !(self.l_coarse.is_finite() && self.l_fine.is_finite()) {
            return Err(param("net thresholds must be finite"));
        }
        Ok(())
    }
}

/// Points of the lattice `center + spacing * Z^k` within `radius + spacing *
/// sqrt(k) / 2` of `center`, so that every point of the radius ball has a
/// lattice point within half a cell diagonal.
pub fn lattice_in_ball(center: &[f64], radius: f64, spacing: f64, limit: u128) -> Result<Vec<Vec<f64>>> {
    let k = center.len();
    if k == 0 {
        return Err(param("lattice needs dimension >= 1"));
    }
    if !(radius >= 0.0 && spacing > 0.0) {
        return Err(param("lattice radius must be non-negative and spacing positive"));
    }
    let reach = radius + spacing * (k as f64).sqrt() / 2.0;
    let steps = (reach / spacing).floor() as i64;
    let side = (2 * steps + 1) as u128;
    let required = side.checked_pow(k as u32).unwrap_or(u128::MAX);
    if required > limit {
        return Err(Error::Scale {
            what: "lattice points",
            required,
            limit,
        });
    }
    let reach2 = reach * reach * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut idx = vec![-steps; k];
    loop {
        let offset2: f64 = idx.iter().map(|&i| (i as f64 * spacing).powi(2)).sum();
        if offset2 <= reach2 {
            out.push(center.iter().zip(&idx).map(|(c, &i)| c + i as f64 * spacing).collect());
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == k {
                return Ok(out);
            }
            idx[j] += 1;
            if idx[j] <= steps {
                break;
            }
            idx[j] = -steps;
            j += 1;
        }
    }
}

/// Coarse estimate over a lattice anchored at the origin inside the
/// radius-`range_bound` ball; score is minus `#{i : ||p_i - x|| >= L_coarse}`.
pub fn coarse_dense<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[Vec<f64>],
    range_bound: f64,
    epsilon: f64,
    net: &DenseNetParams,
) -> Result<Vec<f64>> {
    net.validate()?;
    let k = points.first().map(Vec::len).ok_or_else(|| param("no points"))?;
    if !(epsilon > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon}")));
    }
    let lattice = lattice_in_ball(&vec![0.0; k], range_bound, net.coarse_spacing, net.net_limit)?;
    let l2 = net.l_coarse * net.l_coarse;
    let scores: Vec<f64> = lattice
        .par_iter()
        .map(|x| {
            let far = points
                .iter()
                .filter(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= l2)
                .count();
            -(far as f64)
        })
        .collect();
    let pick = sample_exponential_index(rng, &scores, 1.0, epsilon);
    Ok(lattice[pick].clone())
}

/// Fine estimate over a lattice of spacing `fine_spacing` in the
/// radius-`sqrt(k)` ball around `center`; score is minus the directional
/// outlier count at `L_fine`.
pub fn fine_dense<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[Vec<f64>],
    center: &[f64],
    epsilon: f64,
    net: &DenseNetParams,
    dirs: &DirectionSet,
) -> Result<Vec<f64>> {
    net.validate()?;
    if !(epsilon > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon}")));
    }
    if center.len() != dirs.k() {
        return Err(param("centre and direction dimensions differ"));
    }
    let radius = (center.len() as f64).sqrt();
    let lattice = lattice_in_ball(center, radius, net.fine_spacing, net.net_limit)?;
    let proj = Projections::new(points, dirs);
    let scores: Vec<f64> = lattice
        .par_iter()
        .map(|x| -(proj.max_count(dirs, Some(x), net.l_fine) as f64))
        .collect();
    let pick = sample_exponential_index(rng, &scores, 1.0, epsilon);
    Ok(lattice[pick].clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelParams {
    pub k: usize,
    pub epsilon: f64,
    pub bucket_size: usize,
    pub range_bound: f64,
    pub score: SubsetScoreParams,
    pub net: DenseNetParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelOutput {
    pub estimate: Vec<f64>,
    pub support: Vec<usize>,
    pub spent: PrivacyBudget,
}

/// Subset selection, coarse and fine dense estimation with `epsilon / 3`
/// each; coordinates outside the selected subset are zero.
pub fn subset_selection_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    p: &SubsetSelParams,
) -> Result<SubsetSelOutput> {
    if p.k == 0 || p.k > data.d() {
        return Err(param(format!("k must lie in [1, d={}], got {}", data.d(), p.k)));
    }
    if !(p.range_bound > 0.0) {
        return Err(param("range bound must be positive"));
    }
    // fail fast on scale before touching any randomness
    check_subset_scale(data.d(), p.k, p.score.scale_limit)?;
    let total = PrivacyBudget::pure(p.epsilon)?;
    let stage = total.split(3)?[0];
    let mut ledger = BudgetLedger::new(total);
    let bd = bucket_means(data, p.bucket_size)?;
    let dirs = DirectionSet::new(rng, p.k, p.score.n_random_dirs)?;

    let support = select_subset(rng, &bd, p.k, &dirs, &p.score, stage.epsilon())?;
    ledger.charge("support", stage)?;

    let points = bd.restrict(&support);
    let partial = |ledger: &BudgetLedger, stage: &'static str, e: Error| Error::Partial {
        stage,
        spent_epsilon: ledger.spent_epsilon(),
        source: Box::new(e),
    };
    let coarse = coarse_dense(rng, &points, p.range_bound, stage.epsilon(), &p.net)
        .map_err(|e| partial(&ledger, "coarse estimation", e))?;
    ledger.charge("coarse", stage)?;
    let fine = fine_dense(rng, &points, &coarse, stage.epsilon(), &p.net, &dirs)
        .map_err(|e| partial(&ledger, "fine estimation", e))?;
    ledger.charge("fine", stage)?;

    let mut estimate = vec![0.0; data.d()];
    for (&i, v) in support.iter().zip(fine) {
        estimate[i] = v;
    }
    Ok(SubsetSelOutput {
        estimate,
        support,
        spent: ledger.spent().unwrap_or(total),
    })
}
