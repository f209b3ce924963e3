//! Seeded randomness and the noise primitives every mechanism builds on.
//!
//! All randomness is routed through [`RngHandle`], an immutable `(seed, stream_id)`
//! pair. A handle is turned into a generator with [`RngHandle::rng`], which yields
//! a ChaCha20 stream keyed by `seed` and positioned on stream `stream_id`.
//!
//! Child streams are derived by label: the child keeps the parent seed and takes
//! as its stream id the first eight bytes (little endian) of
//! `SHA-256(seed_le || stream_id_le || label_utf8)`. Derivation is therefore
//! path dependent and needs no shared mutable state.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{param, Result};

/// The concrete generator behind every [`RngHandle`].
pub type StreamRng = ChaCha20Rng;

/// Immutable address of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Deterministic child stream. Same `(seed, stream_id, label)` gives the same child.
    pub fn derive(&self, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.stream_id.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        Self {
            seed: self.seed,
            stream_id: u64::from_le_bytes(word),
        }
    }

    /// Shorthand for `derive(&format!("{label}/{index}"))`.
    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        self.derive(&format!("{label}/{index}"))
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    location: f64,
    scale: f64,
}

impl LaplaceParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(param(format!("Laplace scale must be positive and finite, got {scale}")));
        }
        if !location.is_finite() {
            return Err(param(format!("Laplace location must be finite, got {location}")));
        }
        Ok(Self { location, scale })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Inverse CDF evaluated at `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.5 {
            self.location + self.scale * (2.0 * p).ln()
        } else {
            self.location - self.scale * (2.0 * (1.0 - p)).ln()
        }
    }
}

/// One Laplace draw by inverse CDF from a single open-interval uniform.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, p: LaplaceParams) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    p.location - p.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Zero-centred Laplace draw; `scale` must already be validated as positive.
pub(crate) fn laplace_noise<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Maximum of `count` i.i.d. Laplace(0, scale) draws, sampled directly from
/// the order-statistic law `P(max <= x) = F(x)^count`.
pub(crate) fn max_of_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64, count: u64) -> f64 {
    debug_assert!(count > 0);
    let u: f64 = rng.sample(Open01);
    let log_p = u.ln() / count as f64;
    let p = log_p.exp();
    if p <= 0.5 {
        scale * (2.0 * p).ln()
    } else {
        // 1 - p computed without cancellation
        let tail = -log_p.exp_m1();
        -scale * (2.0 * tail).ln()
    }
}

/// Spherical Gaussian draw `N(mean, per_coord_variance * I)`.
pub fn sample_gaussian_vector<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &[f64],
    per_coord_variance: f64,
) -> Result<Vec<f64>> {
    if !(per_coord_variance >= 0.0) || !per_coord_variance.is_finite() {
        return Err(param(format!(
            "variance must be non-negative and finite, got {per_coord_variance}"
        )));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(param("mean must be finite"));
    }
    let mut out = mean.to_vec();
    fill_gaussian(rng, &mut out, per_coord_variance.sqrt());
    Ok(out)
}

/// Adds i.i.d. `N(0, sd^2)` noise in place. `sd == 0` leaves `buf` untouched.
pub(crate) fn fill_gaussian<R: Rng + ?Sized>(rng: &mut R, buf: &mut [f64], sd: f64) {
    if sd == 0.0 {
        return;
    }
    for x in buf.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += sd * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (ma, va) = mean_var(a);
        let (mb, vb) = mean_var(b);
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>()
            / (a.len() as f64 - 1.0);
        cov / (va * vb).sqrt()
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        assert!(LaplaceParams::new(0.0, 0.0).is_err());
        assert!(LaplaceParams::new(0.0, -1.0).is_err());
        assert!(LaplaceParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn laplace_degenerate_scale_returns_location() {
        let mut rng = RngHandle::new(1).rng();
        let p = LaplaceParams::new(3.25, 1e-300).unwrap();
        for _ in 0..1000 {
            assert!((sample_laplace(&mut rng, p) - 3.25).abs() <= 1e-290);
        }
    }

    #[test]
    fn laplace_moments() {
        let mut rng = RngHandle::new(7).rng();
        let p = LaplaceParams::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_laplace(&mut rng, p)).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() <= 0.005, "mean {m}");
        assert!((1.98..=2.02).contains(&v), "variance {v}");
    }

    #[test]
    fn laplace_median_is_location() {
        let mut rng = RngHandle::new(8).rng();
        let p = LaplaceParams::new(5.0, 2.0).unwrap();
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_laplace(&mut rng, p)).collect();
        xs.sort_by(f64::total_cmp);
        let med = xs[xs.len() / 2];
        assert!((4.95..=5.05).contains(&med), "median {med}");
    }

    #[test]
    fn laplace_tail_matches_exponential() {
        let mut rng = RngHandle::new(9).rng();
        let p = LaplaceParams::new(0.0, 1.5).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng, p)).collect();
        for t in [1.0f64, 2.0, 4.0] {
            let expected = (-t).exp();
            let frac = xs.iter().filter(|x| x.abs() > t * 1.5).count() as f64 / n as f64;
            let sd = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!((frac - expected).abs() <= 3.0 * sd, "t={t}: {frac} vs {expected}");
        }
    }

    #[test]
    fn gaussian_zero_variance_is_mean() {
        let mut rng = RngHandle::new(2).rng();
        let mean = vec![1.5, -2.0, 1e6];
        assert_eq!(sample_gaussian_vector(&mut rng, &mean, 0.0).unwrap(), mean);
        assert!(sample_gaussian_vector(&mut rng, &mean, -1.0).is_err());
    }

    #[test]
    fn gaussian_coordinate_means() {
        let mut rng = RngHandle::new(3).rng();
        let d = 10;
        let trials = 100_000;
        let mut sums = vec![0.0; d];
        for _ in 0..trials {
            let x = sample_gaussian_vector(&mut rng, &vec![0.0; d], 1.0).unwrap();
            for (s, v) in sums.iter_mut().zip(&x) {
                *s += v;
            }
        }
        for s in sums {
            assert!((s / trials as f64).abs() <= 0.02);
        }
    }

    #[test]
    fn gaussian_spread_is_translation_invariant() {
        let mut rng = RngHandle::new(4).rng();
        let mean = vec![0.0, 1e6];
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_gaussian_vector(&mut rng, &mean, 1.0).unwrap()[1])
            .collect();
        let (_, v) = mean_var(&xs);
        let sd = v.sqrt();
        assert!((0.97..=1.03).contains(&sd), "sd {sd}");
    }

    #[test]
    fn gaussian_passes_ks() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let mut rng = RngHandle::new(5).rng();
        let n = 10_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sample_gaussian_vector(&mut rng, &[0.0, 0.0, 0.0], 1.0).unwrap()[2])
            .collect();
        xs.sort_by(f64::total_cmp);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let stat = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic KS critical value at 1e-3: sqrt(-ln(0.0005)/2) / sqrt(n)
        let critical = ((-(0.0005f64).ln()) / 2.0).sqrt() / (n as f64).sqrt();
        assert!(stat < critical, "KS stat {stat} >= {critical}");
    }

    #[test]
    fn derive_is_deterministic() {
        let root = RngHandle::new(42);
        let mut a = root.derive("x").rng();
        let mut b = root.derive("x").rng();
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn derived_streams_uncorrelated() {
        let root = RngHandle::new(42);
        let mut a = root.derive("a").rng();
        let mut b = root.derive("b").rng();
        let xs: Vec<f64> = (0..10_000).map(|_| a.random()).collect();
        let ys: Vec<f64> = (0..10_000).map(|_| b.random()).collect();
        assert!(pearson(&xs, &ys).abs() < 0.03);
    }

    #[test]
    fn derive_is_path_dependent() {
        let root = RngHandle::new(42);
        let child = root.derive("a");
        assert_ne!(child.derive("a"), child);
        assert_ne!(child.derive("a"), root.derive("a"));
        let mut x = child.derive("a").rng();
        let mut y = root.derive("a").rng();
        assert_ne!(x.random::<u64>(), y.random::<u64>());
    }

    #[test]
    fn max_of_laplace_matches_materialised_max() {
        // Compare the direct order-statistic draw with brute-force maxima.
        let mut rng = RngHandle::new(11).rng();
        let trials = 20_000;
        let mut direct: Vec<f64> = (0..trials).map(|_| max_of_laplace(&mut rng, 2.0, 50)).collect();
        let mut brute: Vec<f64> = (0..trials)
            .map(|_| (0..50).map(|_| laplace_noise(&mut rng, 2.0)).fold(f64::MIN, f64::max))
            .collect();
        direct.sort_by(f64::total_cmp);
        brute.sort_by(f64::total_cmp);
        for q in [0.1, 0.5, 0.9] {
            let i = (q * trials as f64) as usize;
            assert!((direct[i] - brute[i]).abs() < 0.15, "q={q}: {} vs {}", direct[i], brute[i]);
        }
    }
}
