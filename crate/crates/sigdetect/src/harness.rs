//! Monte Carlo harness: empirical level and power with confidence intervals,
//! bisection for empirical separation radii, and log-log rate-scaling
//! experiments.
//!
//! Replicates are addressed by (seed, replicate, coordinate), results are
//! collected in replicate order and reduced sequentially, so every estimate
//! is bit-identical regardless of the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Signal, SignalClass, VarianceProfile, WeightSeq};
use crate::numeric::{binomial_se, fit_line, wilson_interval};
use crate::priors::{prior_sample, PriorSpec};
use crate::procedures::{PreparedTest, TestKind, TestProcedure};
use crate::quantiles::QuantileMethod;
use crate::rates::rho_d_sq;
use crate::rng::NoiseSource;

/// Minimum replicate count for harness estimates.
pub const MIN_REPS: u64 = 1_000;

/// The alternative a power experiment draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum Alternative {
    Null,
    Fixed(Signal),
    Prior(PriorSpec),
}

/// How the ray of alternatives is placed when scanning a separation radius.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Least-favorable fixed direction: mass ∝ σ_j² on 1..=D for S_D and
    /// ellipsoid/ℓp classes (at the bias-variance balance level), mass ∝ σ_j
    /// on the k largest-variance coordinates for sparse classes.
    WorstCaseTopVariances,
    /// θ ∝ σ_j on the given support, scaled to ‖θ‖₂ = ρ.
    FixedSupport(Vec<usize>),
    /// Per-replicate direction drawn from the class's least-favorable prior,
    /// normalized to ‖θ‖₂ = ρ.
    UniformPrior,
}

/// Empirical rejection frequency under the null, with a Wilson 95% interval.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub alpha: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub se: f64,
    pub reps: u64,
    /// estimate ≤ α + 3·se(α): the certificate power experiments require.
    pub pass: bool,
}

/// Empirical rejection frequency under an alternative.
#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub se: f64,
    pub reps: u64,
}

/// One point of a power curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerCurvePoint {
    pub rho: f64,
    pub power: f64,
    pub half_width: f64,
}

/// Result of the bisection for the empirical separation radius.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    /// Placement-conditional lower estimate of the uniform separation radius.
    pub rho_hat: f64,
    pub target_power: f64,
    pub curve: Vec<PowerCurvePoint>,
    pub iterations: u32,
}

/// Bisection controls for separation estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BisectionSettings {
    pub max_iter: u32,
    /// Relative tolerance on ρ.
    pub rel_tol: f64,
    /// Replicates per power point.
    pub point_reps: u64,
}

impl Default for BisectionSettings {
    fn default() -> Self {
        Self {
            max_iter: 20,
            rel_tol: 0.02,
            point_reps: 20_000,
        }
    }
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!(
            "harness estimates need reps >= {MIN_REPS}, got {reps}"
        )));
    }
    Ok(())
}

fn count_rejects(
    profile: &VarianceProfile,
    prepared: &PreparedTest,
    signal: &Signal,
    reps: u64,
    data: &NoiseSource,
) -> Result<u64> {
    let n = profile.horizon();
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let obs = profile.sample_prefix(signal, data, r, n)?;
            Ok(prepared.evaluate(&obs)?.reject as u64)
        })
        .try_reduce(|| 0, |a: u64, b| Ok(a + b))
}

/// Empirical level of a test under θ = 0.
pub fn estimate_level(
    profile: &VarianceProfile,
    test: &TestProcedure,
    reps: u64,
    seed: u64,
) -> Result<LevelReport> {
    check_reps(reps)?;
    let prepared = test.prepare(profile)?;
    let data = NoiseSource::new(seed);
    let rejects = count_rejects(profile, &prepared, &Signal::zero(), reps, &data)?;
    let estimate = rejects as f64 / reps as f64;
    let (ci_low, ci_high) = wilson_interval(rejects, reps);
    let se = binomial_se(test.level, reps);
    Ok(LevelReport {
        alpha: test.level,
        estimate,
        ci_low,
        ci_high,
        se,
        reps,
        pass: estimate <= test.level + 3.0 * se,
    })
}

/// Empirical power of a test under a fixed signal or a prior.
pub fn estimate_power(
    profile: &VarianceProfile,
    test: &TestProcedure,
    alternative: &Alternative,
    reps: u64,
    data_seed: u64,
    prior_seed: u64,
) -> Result<PowerReport> {
    check_reps(reps)?;
    let prepared = test.prepare(profile)?;
    let data = NoiseSource::new(data_seed);
    let rejects = match alternative {
        Alternative::Null => count_rejects(profile, &prepared, &Signal::zero(), reps, &data)?,
        Alternative::Fixed(signal) => count_rejects(profile, &prepared, signal, reps, &data)?,
        Alternative::Prior(spec) => {
            let prior_src = NoiseSource::new(prior_seed);
            let n = profile.horizon();
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let theta = prior_sample(spec, profile, &prior_src, r)?;
                    let obs = profile.sample_prefix(&theta, &data, r, n)?;
                    Ok(prepared.evaluate(&obs)?.reject as u64)
                })
                .try_reduce(|| 0, |a: u64, b| Ok(a + b))?
        }
    };
    let estimate = rejects as f64 / reps as f64;
    let (ci_low, ci_high) = wilson_interval(rejects, reps);
    Ok(PowerReport {
        estimate,
        ci_low,
        ci_high,
        se: binomial_se(estimate.clamp(1e-12, 1.0 - 1e-12), reps),
        reps,
    })
}

/// Level certificate followed by a power estimate. Errors when the level
/// check fails, so no power figure is ever reported for a broken test.
pub fn verified_power(
    profile: &VarianceProfile,
    test: &TestProcedure,
    alternative: &Alternative,
    reps: u64,
    data_seed: u64,
    prior_seed: u64,
) -> Result<(LevelReport, PowerReport)> {
    let level = estimate_level(profile, test, reps, data_seed)?;
    if !level.pass {
        return Err(Error::LevelUnverified(format!(
            "empirical level {:.5} exceeds {:.5} + 3 s.e.",
            level.estimate, level.alpha
        )));
    }
    let power = estimate_power(profile, test, alternative, reps, data_seed, prior_seed)?;
    Ok((level, power))
}

/// Unit-norm placement direction for a class, or None when the placement
/// draws a fresh direction per replicate.
fn placement_direction(
    placement: &Placement,
    class: &SignalClass,
    profile: &VarianceProfile,
    alpha: f64,
    beta: f64,
) -> Result<Option<Signal>> {
    match placement {
        Placement::FixedSupport(indices) => {
            if indices.is_empty() {
                return Err(Error::InvalidParameter(
                    "fixed-support placement needs at least one index".into(),
                ));
            }
            let mut entries = Vec::new();
            let mut norm_sq = 0.0;
            for &j in indices {
                let s = profile.sigma_at(j)?;
                entries.push((j, s));
                norm_sq += s * s;
            }
            let norm = norm_sq.sqrt();
            Ok(Some(Signal::from_entries(
                entries.into_iter().map(|(j, s)| (j, s / norm)),
            )?))
        }
        Placement::WorstCaseTopVariances => {
            let support_scaled: Vec<(usize, f64)> = match class {
                SignalClass::SD { d } => sd_direction(profile, *d)?,
                SignalClass::Sparse { k, n } => {
                    // k largest-variance coordinates, |θ_j| ∝ σ_j.
                    let sigmas = profile.sigmas(*n)?;
                    let mut idx: Vec<usize> = (1..=*n).collect();
                    idx.sort_by(|&a, &b| {
                        sigmas[b - 1].partial_cmp(&sigmas[a - 1]).expect("finite")
                    });
                    idx.truncate(*k);
                    idx.into_iter().map(|j| (j, sigmas[j - 1])).collect()
                }
                SignalClass::Ellipsoid { weights, radius } => {
                    let d = balance_level(profile, weights, *radius, alpha, beta, 1.0)?;
                    sd_direction(profile, d)?
                }
                SignalClass::Lp(body) => {
                    let d = balance_level(
                        profile,
                        &body.weights,
                        body.radius,
                        alpha,
                        beta,
                        1.0 - 2.0 / body.p,
                    )?;
                    sd_direction(profile, d)?
                }
            };
            let norm = support_scaled
                .iter()
                .map(|(_, v)| v * v)
                .sum::<f64>()
                .sqrt();
            Ok(Some(Signal::from_entries(
                support_scaled.into_iter().map(|(j, v)| (j, v / norm)),
            )?))
        }
        Placement::UniformPrior => Ok(None),
    }
}

/// Direction ∝ σ_j² on 1..=d.
fn sd_direction(profile: &VarianceProfile, d: usize) -> Result<Vec<(usize, f64)>> {
    Ok(profile
        .sigmas(d)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i + 1, s * s))
        .collect())
}

/// Smallest D with √D^q R² a_D⁻² ≤ ρ_D² (q = 0 for ellipsoids), the
/// bias-variance balance level; horizon when the bias never drops below the
/// detection rate. Absolute constants are dropped from the comparison the
/// way the rate statements absorb them, so the level tracks the continuous
/// balance point.
pub fn balance_level(
    profile: &VarianceProfile,
    weights: &WeightSeq,
    radius: f64,
    alpha: f64,
    beta: f64,
    sqrt_exponent: f64,
) -> Result<usize> {
    let n = profile.horizon();
    let c = crate::rates::c_alpha_beta(alpha, beta)?;
    for d in 1..=n {
        let a = weights.at(d)?;
        let bias = (d as f64).sqrt().powf(sqrt_exponent) * radius * radius / (a * a);
        if bias <= rho_d_sq(profile, d, alpha, beta)? / c {
            return Ok(d);
        }
    }
    Ok(n)
}

/// Least-favorable prior matching a class for the uniform-prior placement.
fn class_prior(class: &SignalClass) -> Result<PriorSpec> {
    match class {
        SignalClass::SD { d } => PriorSpec::rademacher_sd(*d, 1.0),
        SignalClass::Sparse { k, n } => PriorSpec::sparse_subset(*k, *n, 0, 1.0),
        _ => Err(Error::InvalidParameter(
            "uniform-prior placement is defined for S_D and sparse classes".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn power_at_rho(
    profile: &VarianceProfile,
    prepared: &PreparedTest,
    direction: &Option<Signal>,
    prior: &Option<PriorSpec>,
    rho: f64,
    reps: u64,
    data: &NoiseSource,
    prior_src: &NoiseSource,
) -> Result<u64> {
    let n = profile.horizon();
    match direction {
        Some(dir) => {
            let signal = dir.scaled(rho);
            count_rejects(profile, prepared, &signal, reps, data)
        }
        None => {
            let spec = prior.as_ref().expect("prior placement");
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let draw = prior_sample(spec, profile, prior_src, r)?;
                    let unit = draw.scaled(1.0 / draw.norm());
                    let obs = profile.sample_prefix(&unit.scaled(rho), data, r, n)?;
                    Ok(prepared.evaluate(&obs)?.reject as u64)
                })
                .try_reduce(|| 0, |a: u64, b| Ok(a + b))
        }
    }
}

/// Bisection on ρ until the empirical power crosses 1-β, within the
/// configured relative tolerance. The returned estimate is a
/// placement-conditional lower bound on the uniform separation radius.
#[allow(clippy::too_many_arguments)]
pub fn empirical_separation(
    profile: &VarianceProfile,
    test: &TestProcedure,
    class: &SignalClass,
    beta: f64,
    placement: &Placement,
    settings: &BisectionSettings,
    rho_bracket: (f64, f64),
    data_seed: u64,
    prior_seed: u64,
) -> Result<SeparationReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidLevel(beta));
    }
    check_reps(settings.point_reps)?;
    let (mut lo, mut hi) = rho_bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let prepared = test.prepare(profile)?;
    let direction = placement_direction(placement, class, profile, test.level, beta)?;
    let prior = match direction {
        Some(_) => None,
        None => Some(class_prior(class)?),
    };
    let data = NoiseSource::new(data_seed);
    let prior_src = NoiseSource::new(prior_seed);
    let target = 1.0 - beta;
    let reps = settings.point_reps;
    let mut curve = Vec::new();
    let eval = |rho: f64, curve: &mut Vec<PowerCurvePoint>| -> Result<f64> {
        let rejects = power_at_rho(
            profile, &prepared, &direction, &prior, rho, reps, &data, &prior_src,
        )?;
        let power = rejects as f64 / reps as f64;
        let (ci_lo, ci_hi) = wilson_interval(rejects, reps);
        curve.push(PowerCurvePoint {
            rho,
            power,
            half_width: (ci_hi - ci_lo) / 2.0,
        });
        Ok(power)
    };
    let p_lo = eval(lo, &mut curve)?;
    let p_hi = eval(hi, &mut curve)?;
    if p_lo >= target || p_hi < target {
        return Err(Error::BracketDoesNotStraddle(format!(
            "power({lo}) = {p_lo}, power({hi}) = {p_hi}, target {target}"
        )));
    }
    let mut iterations = 0;
    while iterations < settings.max_iter && (hi - lo) > settings.rel_tol * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid, &mut curve)?;
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    curve.sort_by(|a, b| a.rho.partial_cmp(&b.rho).expect("finite"));
    Ok(SeparationReport {
        rho_hat: 0.5 * (lo + hi),
        target_power: target,
        curve,
        iterations,
    })
}

/// The rate family of a scaling experiment. Mildly ill-posed polynomial
/// ellipsoids: a_j = j^s, b_j = j^{-t}, so σ_j = σ j^t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateFamily {
    PolyPoly { s: f64, t: f64 },
}

impl RateFamily {
    /// The exponent of σ in the separation-rate entry ρ² ~ σ^e.
    pub fn theoretical_slope(&self) -> f64 {
        match self {
            Self::PolyPoly { s, t } => 4.0 * s / (2.0 * s + 2.0 * t + 0.5),
        }
    }
}

/// One σ-point of a scaling experiment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingPoint {
    pub sigma: f64,
    /// χ² truncation level balancing ρ_D² against the bias term.
    pub d_bar: usize,
    pub rho_hat_sq: f64,
    pub iterations: u32,
}

/// Fitted log-log scaling of empirical separation radii against σ.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub theoretical_slope: f64,
    /// |slope/theoretical - 1|
    pub relative_error: f64,
}

/// Controls for one scaling experiment.
#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub family: RateFamily,
    pub sigma_grid: Vec<f64>,
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub threshold: QuantileMethod,
    pub bisection: BisectionSettings,
    pub data_seed: u64,
    /// Horizon cap for the balance scan.
    pub max_horizon: usize,
}

impl ScalingConfig {
    pub fn new(family: RateFamily, sigma_grid: Vec<f64>) -> Self {
        Self {
            family,
            sigma_grid,
            radius: 1.0,
            alpha: 0.05,
            beta: 0.05,
            threshold: QuantileMethod::MonteCarlo {
                reps: 200_000,
                seed: 0x7e57,
            },
            bisection: BisectionSettings::default(),
            data_seed: 0xda7a,
            max_horizon: 4096,
        }
    }
}

/// Run the full experiment: for each σ build the inverse-problem profile,
/// pick the balance level D̄, estimate the separation radius of the χ² test
/// at D̄, and regress log ρ̂² on log σ.
pub fn scaling_experiment(config: &ScalingConfig) -> Result<ScalingReport> {
    if config.sigma_grid.len() < 4 {
        return Err(Error::InvalidParameter(
            "scaling experiments need at least 4 sigma values".into(),
        ));
    }
    for w in config.sigma_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "the sigma grid must be strictly decreasing".into(),
            ));
        }
    }
    let RateFamily::PolyPoly { s, t } = config.family;
    let weights = WeightSeq::polynomial(s)?;
    let mut points = Vec::with_capacity(config.sigma_grid.len());
    for (i, &sigma) in config.sigma_grid.iter().enumerate() {
        let scan_horizon = crate::model::default_horizon(sigma).min(config.max_horizon);
        let scan_profile = VarianceProfile::polynomial(sigma, t, scan_horizon)?;
        let d_bar = balance_level(
            &scan_profile,
            &weights,
            config.radius,
            config.alpha,
            config.beta,
            0.0,
        )?;
        let profile = VarianceProfile::polynomial(sigma, t, d_bar)?;
        let test = TestProcedure::new(TestKind::Chisq { d: d_bar }, config.alpha)?
            .with_quantile(config.threshold);
        let class = SignalClass::ellipsoid(weights.clone(), config.radius)?;
        let rho_base = rho_d_sq(&profile, d_bar, config.alpha, config.beta)?.sqrt();
        let mut lo = 0.02 * rho_base;
        let mut hi = 8.0 * rho_base;
        let mut report = None;
        for _ in 0..6 {
            match empirical_separation(
                &profile,
                &test,
                &class,
                config.beta,
                &Placement::WorstCaseTopVariances,
                &config.bisection,
                (lo, hi),
                config.data_seed.wrapping_add(i as u64),
                config.data_seed.wrapping_add(1000 + i as u64),
            ) {
                Ok(r) => {
                    report = Some(r);
                    break;
                }
                Err(Error::BracketDoesNotStraddle(_)) => {
                    lo *= 0.5;
                    hi *= 2.0;
                }
                Err(e) => return Err(e),
            }
        }
        let report = report.ok_or_else(|| {
            Error::BracketDoesNotStraddle(format!("no bracket found at sigma={sigma}"))
        })?;
        points.push(ScalingPoint {
            sigma,
            d_bar,
            rho_hat_sq: report.rho_hat * report.rho_hat,
            iterations: report.iterations,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.sigma.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rho_hat_sq.ln()).collect();
    let (slope, intercept, residuals) = fit_line(&xs, &ys);
    let theoretical_slope = config.family.theoretical_slope();
    Ok(ScalingReport {
        points,
        slope,
        intercept,
        residuals,
        theoretical_slope,
        relative_error: (slope / theoretical_slope - 1.0).abs(),
    })
}
