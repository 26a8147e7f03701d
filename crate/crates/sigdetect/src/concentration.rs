//! Exponential tail bounds for the noncentral weighted χ² statistic
//! T̂ = Σ_{j≤D} Y_j², with Monte Carlo verification of both deviation sides.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Signal, VarianceProfile};
use crate::numeric::binomial_se;
use crate::rng::NoiseSource;

/// Deviation thresholds for T̂ around its mean at exponent x:
/// upward exceedance beyond 2√(Σx) + 2(max σ_j²)x and downward exceedance
/// beyond 2√(Σx) each happen with probability at most e^{-x}, where
/// Σ = Σσ_j⁴ + 2Σσ_j²θ_j².
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailBound {
    pub x: f64,
    /// Σ = Σσ_j⁴ + 2Σσ_j²θ_j²
    pub sigma_term: f64,
    /// E(T̂) = Σθ_j² + Σσ_j²
    pub mean: f64,
    pub upper_threshold: f64,
    pub lower_threshold: f64,
    /// e^{-x}
    pub probability_bound: f64,
}

/// Thresholds of the noncentral deviation inequality, computed exactly.
pub fn noncentral_tail_bounds(
    profile: &VarianceProfile,
    signal: &Signal,
    d: usize,
    x: f64,
) -> Result<TailBound> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail exponent must be >= 0, got {x}"
        )));
    }
    let sigmas = profile.sigmas(d)?;
    if let Some(&j) = signal.support().last() {
        if j > d {
            return Err(Error::IndexOutOfRange {
                index: j,
                horizon: d,
            });
        }
    }
    let mut sum2 = 0.0;
    let mut sum4 = 0.0;
    let mut cross = 0.0;
    let mut theta2 = 0.0;
    let mut max_sq: f64 = 0.0;
    for (i, s) in sigmas.iter().enumerate() {
        let t = signal.value_at(i + 1);
        sum2 += s * s;
        sum4 += s.powi(4);
        cross += s * s * t * t;
        theta2 += t * t;
        max_sq = max_sq.max(s * s);
    }
    let sigma_term = sum4 + 2.0 * cross;
    Ok(TailBound {
        x,
        sigma_term,
        mean: theta2 + sum2,
        upper_threshold: 2.0 * (sigma_term * x).sqrt() + 2.0 * max_sq * x,
        lower_threshold: 2.0 * (sigma_term * x).sqrt(),
        probability_bound: (-x).exp(),
    })
}

/// Central-case deviation threshold for Σσ_j²(ε_j²-1):
/// 2√x (Σσ_j⁴)^{1/2} + 2x max σ_j², exceeded with probability at most e^{-x}.
pub fn central_tail_threshold(profile: &VarianceProfile, d: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail exponent must be >= 0, got {x}"
        )));
    }
    let sigmas = profile.sigmas(d)?;
    let sum4: f64 = sigmas.iter().map(|s| s.powi(4)).sum();
    let max_sq = sigmas.iter().map(|s| s * s).fold(0.0, f64::max);
    Ok(2.0 * x.sqrt() * sum4.sqrt() + 2.0 * x * max_sq)
}

/// One row of the tail-verification table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailRow {
    pub x: f64,
    pub upper_threshold: f64,
    pub lower_threshold: f64,
    /// Empirical P(T̂ - E(T̂) ≥ upper threshold)
    pub emp_up: f64,
    /// Empirical P(T̂ - E(T̂) ≤ -lower threshold)
    pub emp_down: f64,
    /// e^{-x}
    pub bound: f64,
    /// Binomial standard error at the bound value.
    pub se: f64,
}

/// Empirical exceedance probabilities of both deviation sides over a grid of
/// exponents, from a single set of replicates.
pub fn verify_tail(
    profile: &VarianceProfile,
    signal: &Signal,
    d: usize,
    x_grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<TailRow>> {
    if reps < 10_000 {
        return Err(Error::InvalidParameter(
            "tail verification needs reps >= 10000".into(),
        ));
    }
    let bounds: Vec<TailBound> = x_grid
        .iter()
        .map(|&x| noncentral_tail_bounds(profile, signal, d, x))
        .collect::<Result<_>>()?;
    let sigmas = profile.sigmas(d)?;
    let theta: Vec<f64> = (1..=d).map(|j| signal.value_at(j)).collect();
    // E(T̂) is computed exactly, so the table isolates tail error.
    let mean: f64 =
        theta.iter().map(|t| t * t).sum::<f64>() + sigmas.iter().map(|s| s * s).sum::<f64>();
    let noise = NoiseSource::new(seed);
    let counts: Vec<(u64, u64)> = (0..reps)
        .into_par_iter()
        .fold(
            || vec![(0u64, 0u64); bounds.len()],
            |mut acc, r| {
                let eps = noise.normal_row(r, d);
                let t_hat: f64 = (0..d)
                    .map(|i| {
                        let y = theta[i] + sigmas[i] * eps[i];
                        y * y
                    })
                    .sum();
                let dev = t_hat - mean;
                for (i, b) in bounds.iter().enumerate() {
                    if dev >= b.upper_threshold {
                        acc[i].0 += 1;
                    }
                    if dev <= -b.lower_threshold {
                        acc[i].1 += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![(0u64, 0u64); bounds.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    Ok(bounds
        .iter()
        .zip(counts)
        .map(|(b, (up, down))| TailRow {
            x: b.x,
            upper_threshold: b.upper_threshold,
            lower_threshold: b.lower_threshold,
            emp_up: up as f64 / reps as f64,
            emp_down: down as f64 / reps as f64,
            bound: b.probability_bound,
            se: binomial_se(b.probability_bound.min(1.0), reps),
        })
        .collect())
}
