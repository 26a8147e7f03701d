//! Null-distribution quantiles for the test statistics: the weighted χ²
//! statistic Σ σ_j² ε_j², the max statistic max_j ε_j², and two-sided
//! Gaussian thresholds.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::VarianceProfile;
use crate::numeric::{pairwise_sum, std_normal_quantile};
use crate::rng::NoiseSource;

/// Minimum replicate count accepted for Monte Carlo quantiles.
pub const MIN_MC_REPS: u64 = 10_000;

/// How a null quantile is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileMethod {
    /// Empirical (1-α) quantile from simulated null statistics.
    MonteCarlo { reps: u64, seed: u64 },
    /// Closed-form upper bound on the quantile (conservative threshold).
    AnalyticBound,
    /// Exact inversion, available only where a closed form exists.
    Exact,
}

impl QuantileMethod {
    pub fn monte_carlo(reps: u64, seed: u64) -> Result<Self> {
        if reps < MIN_MC_REPS {
            return Err(Error::InvalidParameter(format!(
                "monte carlo quantiles need at least {MIN_MC_REPS} reps, got {reps}"
            )));
        }
        Ok(Self::MonteCarlo { reps, seed })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::MonteCarlo { .. } => "monte-carlo",
            Self::AnalyticBound => "analytic-bound",
            Self::Exact => "exact",
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(alpha))
    }
}

/// Empirical (1-α) quantile: the order statistic at index ⌈reps·(1-α)⌉ of the
/// sorted draws.
fn empirical_quantile(mut draws: Vec<f64>, alpha: f64) -> f64 {
    let reps = draws.len();
    draws.sort_unstable_by(f64::total_cmp);
    let rank = (reps as f64 * (1.0 - alpha)).ceil() as usize;
    draws[rank.clamp(1, reps) - 1]
}

/// Simulated null statistics Σ_{j≤d} σ_j² ε_j², one per replicate,
/// deterministically addressed by (seed, replicate, j).
pub fn simulate_weighted_chisq(
    profile: &VarianceProfile,
    d: usize,
    reps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let var: Vec<f64> = profile.sigmas(d)?.iter().map(|s| s * s).collect();
    let noise = NoiseSource::new(seed);
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let eps = noise.normal_row(r, d);
            var.iter().zip(&eps).map(|(v, e)| v * e * e).sum()
        })
        .collect())
}

/// t_{D,1-α}(σ), the (1-α) quantile of Σ_{j≤D} σ_j² ε_j².
///
/// `AnalyticBound` evaluates Σσ_j² + 2√(x_α)(Σσ_j⁴)^{1/2} + 2 x_α max σ_j²
/// with x_α = ln(1/α), an upper bound on the true quantile. `Exact` is only
/// available when σ_1 = ... = σ_D (a scaled χ²_D).
pub fn weighted_chisq_quantile(
    profile: &VarianceProfile,
    d: usize,
    alpha: f64,
    method: &QuantileMethod,
) -> Result<f64> {
    check_alpha(alpha)?;
    if d < 1 {
        return Err(Error::InvalidParameter("quantile needs D >= 1".into()));
    }
    let sigmas = profile.sigmas(d)?;
    match method {
        QuantileMethod::MonteCarlo { reps, seed } => {
            if *reps < MIN_MC_REPS {
                return Err(Error::InvalidParameter(format!(
                    "monte carlo quantiles need at least {MIN_MC_REPS} reps, got {reps}"
                )));
            }
            let draws = simulate_weighted_chisq(profile, d, *reps, *seed)?;
            Ok(empirical_quantile(draws, alpha))
        }
        QuantileMethod::AnalyticBound => {
            let x = (1.0 / alpha).ln();
            let sum_sq = pairwise_sum(&sigmas.iter().map(|s| s * s).collect::<Vec<_>>());
            let sum_4 = pairwise_sum(&sigmas.iter().map(|s| s.powi(4)).collect::<Vec<_>>());
            let max_sq = sigmas.iter().map(|s| s * s).fold(0.0, f64::max);
            Ok(sum_sq + 2.0 * x.sqrt() * sum_4.sqrt() + 2.0 * x * max_sq)
        }
        QuantileMethod::Exact => {
            let first = sigmas[0];
            if sigmas.iter().any(|&s| s != first) {
                return Err(Error::NoClosedForm(
                    "weighted chi-square quantile with unequal weights".into(),
                ));
            }
            let chi =
                ChiSquared::new(d as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(first * first * chi.inverse_cdf(1.0 - alpha))
        }
    }
}

/// q_{n,1-α}, the (1-α) quantile of max_{j≤n} ε_j².
///
/// `Exact` inverts P(max ε_j² ≤ q) = (2Φ(√q)-1)ⁿ; `AnalyticBound` returns
/// 2 ln(n/α), an upper bound valid for all n ≥ 1.
pub fn max_chisq_quantile(n: usize, alpha: f64, method: &QuantileMethod) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 1 {
        return Err(Error::InvalidParameter("max quantile needs n >= 1".into()));
    }
    match method {
        QuantileMethod::Exact => {
            let p = (1.0 + (1.0 - alpha).powf(1.0 / n as f64)) / 2.0;
            let z = std_normal_quantile(p);
            Ok(z * z)
        }
        QuantileMethod::AnalyticBound => Ok(2.0 * (n as f64 / alpha).ln()),
        QuantileMethod::MonteCarlo { reps, seed } => {
            if *reps < MIN_MC_REPS {
                return Err(Error::InvalidParameter(format!(
                    "monte carlo quantiles need at least {MIN_MC_REPS} reps, got {reps}"
                )));
            }
            let noise = NoiseSource::new(*seed);
            let draws: Vec<f64> = (0..*reps)
                .into_par_iter()
                .map(|r| {
                    noise
                        .normal_row(r, n)
                        .into_iter()
                        .map(|e| e * e)
                        .fold(0.0, f64::max)
                })
                .collect();
            Ok(empirical_quantile(draws, alpha))
        }
    }
}

/// q_{j,α}: the two-sided threshold with P(|N(0,σ²)| ≥ q) = α,
/// i.e. q = σ · z_{1-α/2}.
pub fn gaussian_abs_quantile(sigma: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(sigma * std_normal_quantile(1.0 - alpha / 2.0))
}
