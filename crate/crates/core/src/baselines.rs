//! Comparison estimators: pure-DP noisy peeling on the clamped empirical mean
//! and the non-private top-k baseline.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{param, Result};
use crate::noise::laplace_noise;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeelingParams {
    pub k: usize,
    pub epsilon: f64,
    /// A priori bound on `||mu||_inf`.
    pub r_inf: f64,
}

impl PeelingParams {
    pub fn new(k: usize, epsilon: f64, r_inf: f64) -> Result<Self> {
        let p = Self { k, epsilon, r_inf };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(param("k must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.r_inf > 0.0) || !self.r_inf.is_finite() {
            return Err(param(format!("r_inf must be positive, got {}", self.r_inf)));
        }
        Ok(())
    }
}

/// A `d`-vector estimate together with its selected coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub estimate: Vec<f64>,
    /// Selected coordinates in selection order.
    pub support: Vec<usize>,
}

fn clamped_mean(data: &Dataset, r: f64) -> Vec<f64> {
    let mut m = vec![0.0; data.d()];
    for row in data.rows() {
        for (acc, v) in m.iter_mut().zip(row) {
            *acc += v.clamp(-r, r);
        }
    }
    let n = data.n() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn check_data(data: &Dataset, k: usize) -> Result<()> {
    if data.n() == 0 {
        return Err(param("need at least one sample"));
    }
    if k > data.d() {
        return Err(param(format!("k={k} exceeds dimension {}", data.d())));
    }
    Ok(())
}

/// `k` rounds of report-noisy-max on `|m_i|` over the unselected coordinates,
/// each with Laplace scale `scale`.
fn peel<R: Rng + ?Sized>(rng: &mut R, m: &[f64], k: usize, scale: f64) -> Vec<usize> {
    let mut taken = vec![false; m.len()];
    let mut support = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = None;
        let mut best_val = f64::NEG_INFINITY;
        for (i, v) in m.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let noisy = v.abs() + laplace_noise(rng, scale);
            if noisy > best_val {
                best_val = noisy;
                best = Some(i);
            }
        }
        let i = best.expect("k <= d leaves a candidate");
        taken[i] = true;
        support.push(i);
    }
    support
}

/// Noisy peeling with budget `epsilon / (2k)` per selection and per release,
/// both at Laplace scale `4 r_inf k / (epsilon n)`.
pub fn cwz_peeling_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    p: &PeelingParams,
) -> Result<SparseEstimate> {
    p.validate()?;
    check_data(data, p.k)?;
    let m = clamped_mean(data, p.r_inf);
    let scale = 4.0 * p.r_inf * p.k as f64 / (p.epsilon * data.n() as f64);
    let support = peel(rng, &m, p.k, scale);
    let mut estimate = vec![0.0; data.d()];
    for &i in &support {
        estimate[i] = m[i] + laplace_noise(rng, scale);
    }
    Ok(SparseEstimate { estimate, support })
}

/// Selection stage alone with the whole budget: `epsilon / k` per round,
/// Laplace scale `2 r_inf k / (epsilon n)`.
pub fn cwz_peeling_support<R: Rng + ?Sized>(
    rng: &mut R,
    data: &Dataset,
    p: &PeelingParams,
) -> Result<Vec<usize>> {
    p.validate()?;
    check_data(data, p.k)?;
    let m = clamped_mean(data, p.r_inf);
    let scale = 2.0 * p.r_inf * p.k as f64 / (p.epsilon * data.n() as f64);
    Ok(peel(rng, &m, p.k, scale))
}

/// Top-`k` coordinates of `|empirical mean|` (ties to the lower index), with
/// the empirical mean on them and zeros elsewhere.
pub fn nonprivate_baseline(data: &Dataset, k: usize) -> Result<SparseEstimate> {
    check_data(data, k)?;
    let m = data.empirical_mean();
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m[b].abs().total_cmp(&m[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    let mut estimate = vec![0.0; m.len()];
    for &i in &order {
        estimate[i] = m[i];
    }
    Ok(SparseEstimate {
        estimate,
        support: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sparse_gaussian, l2_distance, sample_gaussian_dataset, GroundTruth};
    use crate::noise::RngHandle;

    #[test]
    fn huge_epsilon_gives_exact_top_k() {
        let data = Dataset::from_rows(&[vec![1.0, -5.0, 0.5, 3.0], vec![1.0, -5.0, 0.5, 3.0]]).unwrap();
        let p = PeelingParams::new(2, 1e15, 10.0).unwrap();
        let out = cwz_peeling_estimate(&mut RngHandle::new(1).rng(), &data, &p).unwrap();
        assert_eq!(out.support, vec![1, 3]);
        assert!(l2_distance(&out.estimate, &[0.0, -5.0, 0.0, 3.0]) < 1e-9);
    }

    #[test]
    fn clamping_happens_before_the_mean() {
        let data = Dataset::from_rows(&[vec![100.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let p = PeelingParams::new(1, 1e15, 2.0).unwrap();
        let out = cwz_peeling_estimate(&mut RngHandle::new(2).rng(), &data, &p).unwrap();
        assert!((out.estimate[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn never_selects_twice() {
        let root = RngHandle::new(3);
        let truth = GroundTruth::from_mean(vec![0.0; 30], 1.0).unwrap();
        let data = sample_gaussian_dataset(&mut root.derive("data").rng(), &truth, 20).unwrap();
        let p = PeelingParams::new(30, 0.01, 100.0).unwrap();
        for t in 0..20 {
            let mut rng = root.derive_indexed("run", t).rng();
            let mut s = cwz_peeling_estimate(&mut rng, &data, &p).unwrap().support;
            s.sort_unstable();
            assert_eq!(s, (0..30).collect::<Vec<_>>());
            let mut s = cwz_peeling_support(&mut rng, &data, &p).unwrap();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 30);
        }
    }

    #[test]
    fn nonprivate_exact_without_noise() {
        let mu = vec![0.0, 2.0, 0.0, -7.0, 0.0];
        let data = Dataset::from_rows(&[mu.clone(), mu.clone(), mu.clone()]).unwrap();
        let out = nonprivate_baseline(&data, 2).unwrap();
        assert_eq!(out.estimate, mu);
        assert_eq!(out.support, vec![3, 1]);
        let full = nonprivate_baseline(&data, 5).unwrap();
        assert_eq!(full.estimate, data.empirical_mean());
        assert!(nonprivate_baseline(&data, 6).is_err());
    }

    #[test]
    fn peeling_error_grows_with_range() {
        let root = RngHandle::new(4);
        let (truth, data) =
            generate_sparse_gaussian(&mut root.derive("data").rng(), 200, 5, 10.0, 1.0, 1000).unwrap();
        let median_err = |r: f64| {
            let p = PeelingParams::new(5, 0.5, r).unwrap();
            let mut errs: Vec<f64> = (0..50)
                .map(|t| {
                    let mut rng = root.derive_indexed(&format!("r{r}"), t).rng();
                    l2_distance(&cwz_peeling_estimate(&mut rng, &data, &p).unwrap().estimate, &truth.mu)
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[25]
        };
        let errs: Vec<f64> = [10.0, 20.0, 40.0, 80.0].iter().map(|&r| median_err(r)).collect();
        for w in errs.windows(2) {
            assert!(w[1] >= 0.9 * w[0], "{errs:?}");
        }
        assert!(errs[3] > 2.0 * errs[0], "{errs:?}");
    }
}
