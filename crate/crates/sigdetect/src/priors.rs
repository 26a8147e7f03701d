//! Least-favorable priors over the alternative classes, their likelihood
//! ratios against the null, and the χ²-divergence E₀[L²] that drives the
//! Bayesian lower-bound argument: whenever E₀[L²] ≤ 1 + 4(1-α-β)², no
//! level-α test can keep its type II error below β uniformly over the prior's
//! support.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Signal, VarianceProfile};
use crate::numeric::{binomial_se, ln_binomial, log_cosh, log_sum_exp, pairwise_mean};
use crate::procedures::TestProcedure;
use crate::rng::{rademacher_sign, uniform_range, NoiseSource};

/// Cap on C(n-l, k) for exact subset enumeration in the likelihood ratio.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// A least-favorable prior. Sparse-kind priors operate on the ranks of the
/// sorted noise sequence and map back to original coordinates, preserving
/// ‖θ‖₂² ≥ ρ² for arbitrary profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// θ_j = ω_j σ_j² ρ (Σ_{i≤D} σ_i⁴)^{-1/2} on 1..=D with i.i.d. signs ω:
    /// ‖θ‖₂ = ρ exactly.
    RademacherSd { d: usize, rho: f64 },
    /// θ = ρ ω_j σ_(j) / Σ_{l,k} on a uniformly drawn k-subset of the ranks
    /// {l+1, ..., n}: θ ∈ 𝒮_{k,n} and ‖θ‖₂ ≥ ρ.
    SparseSubset {
        k: usize,
        n: usize,
        l: usize,
        rho: f64,
    },
    /// The Rademacher prior restricted to the top-k variance ranks
    /// {n-k+1, ..., n}: ‖θ‖₂ = ρ exactly.
    TailRademacher { k: usize, n: usize, rho: f64 },
}

impl PriorSpec {
    pub fn rademacher_sd(d: usize, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if d < 1 {
            return Err(Error::InvalidParameter("prior needs D >= 1".into()));
        }
        Ok(Self::RademacherSd { d, rho })
    }

    pub fn sparse_subset(k: usize, n: usize, l: usize, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if k < 1 || k > n {
            return Err(Error::InvalidParameter(format!(
                "sparse prior needs 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        if l > n - k {
            return Err(Error::InvalidParameter(format!(
                "sparse prior needs l <= n-k, got l={l}, k={k}, n={n}"
            )));
        }
        Ok(Self::SparseSubset { k, n, l, rho })
    }

    pub fn tail_rademacher(k: usize, n: usize, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if k < 1 || k > n {
            return Err(Error::InvalidParameter(format!(
                "tail prior needs 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        Ok(Self::TailRademacher { k, n, rho })
    }

    fn window(&self) -> usize {
        match self {
            Self::RademacherSd { d, .. } => *d,
            Self::SparseSubset { n, .. } | Self::TailRademacher { n, .. } => *n,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "prior radius must be positive, got {rho}"
        )))
    }
}

/// Ranks are 1-based positions in the sorted noise sequence; `perm[r-1]` is
/// the original coordinate holding rank r. Stable: ties keep coordinate order.
fn sort_permutation(profile: &VarianceProfile, n: usize) -> Result<Vec<usize>> {
    let sigmas = profile.sigmas(n)?;
    let mut idx: Vec<usize> = (1..=n).collect();
    idx.sort_by(|&a, &b| {
        sigmas[a - 1]
            .partial_cmp(&sigmas[b - 1])
            .expect("sigmas are finite")
    });
    Ok(idx)
}

fn check_window(spec: &PriorSpec, profile: &VarianceProfile) -> Result<()> {
    let n = spec.window();
    if n > profile.horizon() {
        return Err(Error::IndexOutOfRange {
            index: n,
            horizon: profile.horizon(),
        });
    }
    Ok(())
}

/// Draw one signal from the prior. Reproducible given (seed, replicate).
pub fn prior_sample(
    spec: &PriorSpec,
    profile: &VarianceProfile,
    noise: &NoiseSource,
    replicate: u64,
) -> Result<Signal> {
    check_window(spec, profile)?;
    let mut rng = noise.replicate_rng(replicate);
    match spec {
        PriorSpec::RademacherSd { d, rho } => {
            let sigmas = profile.sigmas(*d)?;
            let sum4: f64 = sigmas.iter().map(|s| s.powi(4)).sum();
            let scale = rho / sum4.sqrt();
            Signal::from_entries((1..=*d).map(|j| {
                let s = sigmas[j - 1];
                (j, rademacher_sign(&mut rng) * s * s * scale)
            }))
        }
        PriorSpec::SparseSubset { k, n, l, rho } => {
            let perm = sort_permutation(profile, *n)?;
            let ordered = profile.ordered_variances(*n)?;
            let block: f64 = ordered[*l..*l + *k].iter().map(|s| s * s).sum();
            let scale = rho / block.sqrt();
            // Partial Fisher-Yates over the ranks l+1..=n picks the subset.
            let mut ranks: Vec<usize> = (*l + 1..=*n).collect();
            for i in 0..*k {
                let swap = uniform_range(&mut rng, i, ranks.len() - 1);
                ranks.swap(i, swap);
            }
            Signal::from_entries(ranks[..*k].iter().map(|&r| {
                let coord = perm[r - 1];
                (coord, rademacher_sign(&mut rng) * ordered[r - 1] * scale)
            }))
        }
        PriorSpec::TailRademacher { k, n, rho } => {
            let perm = sort_permutation(profile, *n)?;
            let ordered = profile.ordered_variances(*n)?;
            let sum4: f64 = ordered[*n - *k..].iter().map(|s| s.powi(4)).sum();
            let scale = rho / sum4.sqrt();
            Signal::from_entries((*n - *k + 1..=*n).map(|r| {
                let coord = perm[r - 1];
                let s = ordered[r - 1];
                (coord, rademacher_sign(&mut rng) * s * s * scale)
            }))
        }
    }
}

/// log L_{μρ}(Y): the likelihood ratio of the prior-mixture alternative
/// against the null, in closed form.
pub fn log_likelihood_ratio(y: &[f64], spec: &PriorSpec, profile: &VarianceProfile) -> Result<f64> {
    check_window(spec, profile)?;
    if y.len() < spec.window() {
        return Err(Error::InvalidParameter(format!(
            "observation has {} coordinates, prior needs {}",
            y.len(),
            spec.window()
        )));
    }
    match spec {
        PriorSpec::RademacherSd { d, rho } => {
            let sigmas = profile.sigmas(*d)?;
            let sum2: f64 = sigmas.iter().map(|s| s * s).sum();
            let sum4: f64 = sigmas.iter().map(|s| s.powi(4)).sum();
            let root4 = sum4.sqrt();
            let mut log_l = -rho * rho * sum2 / (2.0 * sum4);
            for yj in &y[..*d] {
                log_l += log_cosh(rho * yj / root4);
            }
            Ok(log_l)
        }
        PriorSpec::TailRademacher { k, n, rho } => {
            let perm = sort_permutation(profile, *n)?;
            let ordered = profile.ordered_variances(*n)?;
            let tail = &ordered[*n - *k..];
            let sum2: f64 = tail.iter().map(|s| s * s).sum();
            let sum4: f64 = tail.iter().map(|s| s.powi(4)).sum();
            let root4 = sum4.sqrt();
            let mut log_l = -rho * rho * sum2 / (2.0 * sum4);
            for r in *n - *k + 1..=*n {
                log_l += log_cosh(rho * y[perm[r - 1] - 1] / root4);
            }
            Ok(log_l)
        }
        PriorSpec::SparseSubset { k, n, l, rho } => {
            let m = *n - *l;
            let ln_c = ln_binomial(m as u64, *k as u64);
            if ln_c > (ENUMERATION_CAP as f64).ln() {
                return Err(Error::CombinatorialBlowup {
                    n: m,
                    k: *k,
                    cap: ENUMERATION_CAP,
                });
            }
            let perm = sort_permutation(profile, *n)?;
            let ordered = profile.ordered_variances(*n)?;
            let block: f64 = ordered[*l..*l + *k].iter().map(|s| s * s).sum();
            let root = block.sqrt();
            // Per-rank log cosh terms, then a log-sum-exp over all subsets.
            let terms: Vec<f64> = (*l + 1..=*n)
                .map(|r| log_cosh(rho * y[perm[r - 1] - 1] / (ordered[r - 1] * root)))
                .collect();
            let subset_logs: Vec<f64> = terms
                .iter()
                .combinations(*k)
                .map(|c| c.into_iter().sum())
                .collect();
            Ok(-(*k as f64) * rho * rho / (2.0 * block) + log_sum_exp(&subset_logs) - ln_c)
        }
    }
}

/// L_{μρ}(Y), strictly positive.
pub fn likelihood_ratio(y: &[f64], spec: &PriorSpec, profile: &VarianceProfile) -> Result<f64> {
    Ok(log_likelihood_ratio(y, spec, profile)?.exp())
}

/// How a reported divergence value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceKind {
    /// Exact product Π cosh(ρ²σ_j²/Σσ⁴) over the prior's support.
    ExactProduct,
    /// Exact hypergeometric expectation Σ_i P(|m∩m'|=i) cosh(ρ²/Σ²)^i.
    ExactHypergeometric,
}

/// E₀[L²] together with its closed-form upper bound.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    /// Exact value of E₀[L²].
    pub value: f64,
    pub kind: DivergenceKind,
    /// cosh-based bound: exp(ρ⁴/(2Σσ⁴)) for Rademacher priors, the binomial
    /// substitution bound exp(k ln(1 + k(cosh(ρ²/Σ²)-1)/(n-l))) for sparse.
    pub upper_bound: f64,
}

/// Exact E₀[L²] and its bound.
pub fn chi2_divergence(spec: &PriorSpec, profile: &VarianceProfile) -> Result<DivergenceReport> {
    check_window(spec, profile)?;
    match spec {
        PriorSpec::RademacherSd { d, rho } => {
            let sigmas = profile.sigmas(*d)?;
            Ok(rademacher_divergence(&sigmas, *rho))
        }
        PriorSpec::TailRademacher { k, n, rho } => {
            let ordered = profile.ordered_variances(*n)?;
            Ok(rademacher_divergence(&ordered[*n - *k..], *rho))
        }
        PriorSpec::SparseSubset { k, n, l, rho } => {
            let block = profile.sigma_block(*l, *k, *n)?;
            let x = rho * rho / block;
            let m = (*n - *l) as u64;
            let kk = *k as u64;
            // Exact: Σ_i P(hypergeometric = i) cosh(x)^i, in log space.
            let ln_cosh_x = log_cosh(x);
            let ln_c_total = ln_binomial(m, kk);
            let logs: Vec<f64> = (0..=kk)
                .map(|i| {
                    ln_binomial(kk, i) + ln_binomial(m - kk, kk - i) - ln_c_total
                        + i as f64 * ln_cosh_x
                })
                .collect();
            let value = log_sum_exp(&logs).exp();
            let upper_bound =
                (kk as f64 * (1.0 + (kk as f64 / m as f64) * (x.cosh() - 1.0)).ln()).exp();
            Ok(DivergenceReport {
                value,
                kind: DivergenceKind::ExactHypergeometric,
                upper_bound,
            })
        }
    }
}

fn rademacher_divergence(sigmas: &[f64], rho: f64) -> DivergenceReport {
    let sum4: f64 = sigmas.iter().map(|s| s.powi(4)).sum();
    let log_value: f64 = sigmas
        .iter()
        .map(|s| log_cosh(rho * rho * s * s / sum4))
        .sum();
    DivergenceReport {
        value: log_value.exp(),
        kind: DivergenceKind::ExactProduct,
        upper_bound: (rho.powi(4) / (2.0 * sum4)).exp(),
    }
}

/// The lower-bound criterion: E₀[L²] ≤ 1 + 4(1-α-β)².
#[derive(Debug, Clone, Serialize)]
pub struct CriterionCheck {
    pub satisfied: bool,
    /// threshold − E₀[L²]; nonnegative iff satisfied.
    pub margin: f64,
    pub threshold: f64,
    pub divergence: DivergenceReport,
}

pub fn divergence_criterion(
    spec: &PriorSpec,
    profile: &VarianceProfile,
    alpha: f64,
    beta: f64,
) -> Result<CriterionCheck> {
    if !(alpha > 0.0 && beta > 0.0 && alpha + beta < 1.0) {
        return Err(Error::LevelsSumTooLarge(alpha + beta));
    }
    let divergence = chi2_divergence(spec, profile)?;
    let t = 1.0 - alpha - beta;
    let threshold = 1.0 + 4.0 * t * t;
    Ok(CriterionCheck {
        satisfied: divergence.value <= threshold,
        margin: threshold - divergence.value,
        threshold,
        divergence,
    })
}

/// Monte Carlo estimate of the prior-averaged type II error
/// E_{θ∼μ}[P_θ(test accepts)] for a specific test, with the test's level
/// verified on the same budget first.
#[derive(Debug, Clone, Serialize)]
pub struct IndistinguishabilityReport {
    pub avg_type_ii: f64,
    pub se: f64,
    pub level_estimate: f64,
    pub reps: u64,
}

pub fn empirical_indistinguishability(
    spec: &PriorSpec,
    profile: &VarianceProfile,
    test: &TestProcedure,
    reps: u64,
    prior_seed: u64,
    data_seed: u64,
) -> Result<IndistinguishabilityReport> {
    if reps < 1000 {
        return Err(Error::InvalidParameter(
            "indistinguishability estimates need reps >= 1000".into(),
        ));
    }
    let prepared = test.prepare(profile)?;
    let data = NoiseSource::new(data_seed);
    // Level gate: the statement only binds for tests that hold their level.
    let null = Signal::zero();
    let null_rejects: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let obs = profile.sample(&null, &data, r).expect("null sample");
            prepared.evaluate(&obs.values).expect("evaluate").reject as u64
        })
        .sum();
    let level_estimate = null_rejects as f64 / reps as f64;
    let gate = test.level + 3.0 * binomial_se(test.level, reps);
    if level_estimate > gate {
        return Err(Error::LevelUnverified(format!(
            "empirical level {level_estimate:.5} exceeds {gate:.5}"
        )));
    }
    let prior_src = NoiseSource::new(prior_seed);
    let accepts: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let theta = prior_sample(spec, profile, &prior_src, r).expect("prior draw");
            let obs = profile.sample(&theta, &data, r).expect("sample");
            (!prepared.evaluate(&obs.values).expect("evaluate").reject) as u64 as f64
        })
        .collect();
    let avg_type_ii = pairwise_mean(&accepts);
    Ok(IndistinguishabilityReport {
        avg_type_ii,
        se: binomial_se(avg_type_ii, reps),
        level_estimate,
        reps,
    })
}
