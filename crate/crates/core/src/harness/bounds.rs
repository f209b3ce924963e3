use std::fmt::Write;

use crate::error::Result;
use crate::mechanisms::{meta_theorem_eta, meta_theorem_failure_bound};

/// Tolerable corruption fraction and failure bounds of an
/// `(epsilon, delta)`-DP mechanism with clean failure rate `beta` on `n` samples.
pub fn print_bounds(beta: f64, epsilon: f64, delta: f64, n: u64) -> Result<String> {
    let bound = meta_theorem_eta(beta, epsilon, delta, n)?;
    let tolerated = (bound.eta * n as f64 * (1.0 + 1e-12)).floor() as u64;
    let mut out = String::new();
    let _ = writeln!(out, "beta = {beta}, epsilon = {epsilon}, delta = {delta}, n = {n}");
    let _ = writeln!(out, "eta = {:.6}", bound.eta);
    let _ = writeln!(out, "tolerated corruptions floor(eta n) = {tolerated}");
    let _ = writeln!(out, "failure bound at floor(eta n) = {:.6}", bound.failure_bound);
    let _ = writeln!(out, "{:>6}  {:>12}", "t", "bound");
    let mut ts: Vec<u64> = [0, 1, 2, 5, 10].into_iter().filter(|&t| t <= n).collect();
    if !ts.contains(&tolerated) {
        ts.push(tolerated);
        ts.sort_unstable();
    }
    for t in ts {
        let _ = writeln!(out, "{t:>6}  {:>12.6}", meta_theorem_failure_bound(beta, epsilon, delta, t));
    }
    Ok(out)
}
