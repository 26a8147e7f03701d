//! Closed-form separation rates: the χ²-channel rate over S_D, the sparse
//! rate over 𝒮_{k,n}, the sup-norm rate, ellipsoid and ℓp-body bounds, and
//! the truncation level D† splitting the ℓp test into its two branches.
//!
//! All suprema/infima over truncation levels are exhaustive scans with
//! memoized prefix sums, so every reported value is auditable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{VarianceProfile, WeightSeq};
use crate::numeric::{ceil_sqrt_convention, std_normal_quantile};

/// c(α,β) = (2 ln(1 + 4(1-α-β)²))^{1/2}.
pub fn c_alpha_beta(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    let t = 1.0 - alpha - beta;
    Ok((2.0 * (1.0 + 4.0 * t * t).ln()).sqrt())
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel(alpha));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidLevel(beta));
    }
    if alpha + beta >= 1.0 {
        return Err(Error::LevelsSumTooLarge(alpha + beta));
    }
    Ok(())
}

/// ρ_D² = c(α,β) (Σ_{j≤D} σ_j⁴)^{1/2}, the detection rate over S_D.
pub fn rho_d_sq(profile: &VarianceProfile, d: usize, alpha: f64, beta: f64) -> Result<f64> {
    let c = c_alpha_beta(alpha, beta)?;
    let sum4: f64 = profile.sigmas(d)?.iter().map(|s| s.powi(4)).sum();
    Ok(c * sum4.sqrt())
}

/// Prefix sums of squared and fourth-power order statistics of the first n
/// noise levels: p2[i] = Σ_{j≤i} σ_(j)², p4[i] = Σ_{j≤i} σ_(j)⁴.
struct OrderedPrefix {
    p2: Vec<f64>,
    p4: Vec<f64>,
}

impl OrderedPrefix {
    fn build(profile: &VarianceProfile, n: usize) -> Result<Self> {
        let ordered = profile.ordered_variances(n)?;
        let mut p2 = vec![0.0; n + 1];
        let mut p4 = vec![0.0; n + 1];
        for (i, s) in ordered.iter().enumerate() {
            p2[i + 1] = p2[i] + s * s;
            p4[i + 1] = p4[i] + s.powi(4);
        }
        Ok(Self { p2, p4 })
    }

    /// Σ²_{l,k}
    fn block(&self, l: usize, k: usize) -> f64 {
        self.p2[l + k] - self.p2[l]
    }

    /// (Σ_{j=n-k+1}^n σ_(j)⁴)^{1/2}
    fn tail_fourth(&self, n: usize, k: usize) -> f64 {
        (self.p4[n] - self.p4[n - k]).sqrt()
    }
}

fn log_term(u: f64) -> f64 {
    (1.0 + u.max(u.sqrt())).ln()
}

fn block_max_from(prefix: &OrderedPrefix, k: usize, n: usize) -> f64 {
    (0..=n - k)
        .map(|l| prefix.block(l, k) * log_term((n - l) as f64 / (k * k) as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The block component max_{0≤l≤n-k} Σ²_{l,k} ln(1 + (n-l)/k² ∨ √((n-l)/k²))
/// of the sparse rate, exposed for cross-checks against the sup-norm rate.
pub fn sparse_block_max(profile: &VarianceProfile, k: usize, n: usize) -> Result<f64> {
    check_kn(profile, k, n)?;
    let prefix = OrderedPrefix::build(profile, n)?;
    Ok(block_max_from(&prefix, k, n))
}

fn check_kn(profile: &VarianceProfile, k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!(
            "sparse rate needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if n > profile.horizon() {
        return Err(Error::IndexOutOfRange {
            index: n,
            horizon: profile.horizon(),
        });
    }
    Ok(())
}

/// ρ²_{k,n}: the sparse detection rate, the maximum of the block term over
/// all l and of the tail fourth-moment term (Σ_{j=n-k+1}^n σ_(j)⁴)^{1/2}.
pub fn rho_kn_sq(profile: &VarianceProfile, k: usize, n: usize) -> Result<f64> {
    check_kn(profile, k, n)?;
    let prefix = OrderedPrefix::build(profile, n)?;
    Ok(block_max_from(&prefix, k, n).max(prefix.tail_fourth(n, k)))
}

/// ρ_{n,∞} = max_{0≤l≤n-1} σ_(l+1) √(ln(1 + n - l)), the sup-norm rate.
pub fn rho_n_inf(profile: &VarianceProfile, n: usize) -> Result<f64> {
    if n < 1 || n > profile.horizon() {
        return Err(Error::IndexOutOfRange {
            index: n,
            horizon: profile.horizon(),
        });
    }
    let ordered = profile.ordered_variances(n)?;
    Ok((0..n)
        .map(|l| ordered[l] * ((1.0 + (n - l) as f64).ln()).sqrt())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Upper bound on the sparse separation radius: the smaller of the full χ²
/// channel (Σ_{j≤n} σ_j⁴)^{1/2} and the thresholding channel Σ²_{n-k,k} ln n,
/// scaled by the constant of the channel achieving the minimum.
#[derive(Debug, Clone, Serialize)]
pub struct SparseUpper {
    /// (Σ_{j≤n} σ_j⁴)^{1/2}, pre-constant.
    pub l2_channel: f64,
    /// Σ²_{n-k,k} ln(n), pre-constant.
    pub threshold_channel: f64,
    /// 8(x_α + x_β + √x_α + √x_β), the proved χ²-channel constant.
    pub chisq_constant: f64,
    /// (q_β + √(2 ln(n/α)))², the thresholding-channel constant.
    pub max_constant: f64,
    /// min(channel) × its constant.
    pub value: f64,
}

pub fn sparse_upper_sq(
    profile: &VarianceProfile,
    k: usize,
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<SparseUpper> {
    check_alpha_beta(alpha, beta)?;
    check_kn(profile, k, n)?;
    let prefix = OrderedPrefix::build(profile, n)?;
    let l2_channel = prefix.p4[n].sqrt();
    let threshold_channel = prefix.block(n - k, k) * (n as f64).ln();
    let x_a = (1.0 / alpha).ln();
    let x_b = (1.0 / beta).ln();
    let chisq_constant = 8.0 * (x_a + x_b + x_a.sqrt() + x_b.sqrt());
    let q_beta = std_normal_quantile(1.0 - beta / 2.0);
    let max_constant = (q_beta + (2.0 * (n as f64 / alpha).ln()).sqrt()).powi(2);
    let value = if l2_channel <= threshold_channel {
        chisq_constant * l2_channel
    } else {
        max_constant * threshold_channel
    };
    Ok(SparseUpper {
        l2_channel,
        threshold_channel,
        chisq_constant,
        max_constant,
        value,
    })
}

/// Minimax sandwich over the ellipsoid {Σ a_j²θ_j² ≤ R²}: the lower bound
/// sup_D (ρ_D² ∧ R² a_D⁻²) and the upper bound inf_D (C·ρ_D² + R² a_D⁻²).
/// The unspecified absolute constant C is reported as a multiplier with
/// value 1.
#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidBounds {
    pub lower: f64,
    pub lower_arg_d: usize,
    pub upper: f64,
    pub upper_arg_d: usize,
    pub constant_multiplier: f64,
}

pub fn ellipsoid_rate_bounds(
    weights: &WeightSeq,
    radius: f64,
    profile: &VarianceProfile,
    alpha: f64,
    beta: f64,
) -> Result<EllipsoidBounds> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let c = c_alpha_beta(alpha, beta)?;
    let n = profile.horizon();
    let sigmas = profile.sigmas(n)?;
    let mut sum4 = 0.0;
    let mut lower = f64::NEG_INFINITY;
    let mut lower_arg_d = 1;
    let mut upper = f64::INFINITY;
    let mut upper_arg_d = 1;
    for d in 1..=n {
        sum4 += sigmas[d - 1].powi(4);
        let rho = c * sum4.sqrt();
        let a = weights.at(d)?;
        let bias = radius * radius / (a * a);
        let lo = rho.min(bias);
        if lo > lower {
            lower = lo;
            lower_arg_d = d;
        }
        let up = rho + bias;
        if up < upper {
            upper = up;
            upper_arg_d = d;
        }
    }
    Ok(EllipsoidBounds {
        lower,
        lower_arg_d,
        upper,
        upper_arg_d,
        constant_multiplier: 1.0,
    })
}

/// The four (a_k, b_k) regimes of the ellipsoid rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateCase {
    /// a_k ~ k^s, b_k ~ k^{-t}: rate σ^{4s/(2s+2t+1/2)}.
    PolyPoly { s: f64, t: f64 },
    /// a_k ~ e^{ν k^s}, b_k ~ k^{-t}: rate σ² (ln σ⁻²)^{(2t+1/2)/s}.
    ExpPoly { nu: f64, s: f64, t: f64 },
    /// a_k ~ k^s, b_k ~ e^{-γ k^r}: rate (ln σ⁻²)^{-2s/r}.
    PolyExp { s: f64, gamma: f64, r: f64 },
    /// a_k ~ e^{ν k^s}, b_k ~ e^{-γ k^r}, s ≤ 1: rate e^{-2ν D̃^s} with D̃
    /// the integer part of the solution of ρ_D² = R² a_D⁻² (R = 1).
    ExpExp { nu: f64, s: f64, gamma: f64, r: f64 },
}

/// Evaluate the rate-table entry f(σ) for 0 < σ < 1.
pub fn rate_table_entry(case: &RateCase, sigma: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rate table needs 0 < sigma < 1, got {sigma}"
        )));
    }
    match *case {
        RateCase::PolyPoly { s, t } => {
            check_positive("s", s)?;
            check_nonnegative("t", t)?;
            Ok(sigma.powf(4.0 * s / (2.0 * s + 2.0 * t + 0.5)))
        }
        RateCase::ExpPoly { nu, s, t } => {
            check_positive("nu", nu)?;
            check_positive("s", s)?;
            check_nonnegative("t", t)?;
            let log_term = (1.0 / (sigma * sigma)).ln();
            Ok(sigma * sigma * log_term.powf((2.0 * t + 0.5) / s))
        }
        RateCase::PolyExp { s, gamma, r } => {
            check_positive("s", s)?;
            check_positive("gamma", gamma)?;
            check_positive("r", r)?;
            let log_term = (1.0 / (sigma * sigma)).ln();
            Ok(log_term.powf(-2.0 * s / r))
        }
        RateCase::ExpExp { nu, s, gamma, r } => {
            check_positive("nu", nu)?;
            check_positive("s", s)?;
            check_positive("gamma", gamma)?;
            check_positive("r", r)?;
            if s > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "the exp-exp rate entry requires s <= 1, got {s}"
                )));
            }
            let d_tilde = exp_exp_balance(nu, s, gamma, r, sigma, alpha, beta)?;
            Ok((-2.0 * nu * (d_tilde as f64).powf(s)).exp())
        }
    }
}

/// Integer part of the continuous solution of ρ_D² = R² a_D⁻² (R = 1) for
/// σ_j = σ e^{γ j^r} and a_j = e^{ν j^s}, found by bisection on the monotone
/// map D ↦ ρ_D² a_D².
fn exp_exp_balance(
    nu: f64,
    s: f64,
    gamma: f64,
    r: f64,
    sigma: f64,
    alpha: f64,
    beta: f64,
) -> Result<usize> {
    let c = c_alpha_beta(alpha, beta)?;
    let horizon = crate::model::default_horizon(sigma) as f64;
    // Continuous interpolation of (Σ_{j≤D} σ_j⁴)^{1/2} between integers.
    let sigma4 = |j: f64| (sigma * (gamma * j.powf(r)).exp()).powi(4);
    let rho_sq = |d: f64| {
        let whole = d.floor() as usize;
        let mut sum = 0.0;
        for j in 1..=whole {
            sum += sigma4(j as f64);
        }
        sum += (d - whole as f64) * sigma4(whole as f64 + 1.0);
        c * sum.sqrt()
    };
    let g = |d: f64| rho_sq(d).ln() + 2.0 * nu * d.powf(s); // ln(ρ_D² a_D²), increasing
    if g(1.0) >= 0.0 {
        return Ok(1);
    }
    if g(horizon) <= 0.0 {
        return Ok(horizon as usize);
    }
    let (mut lo, mut hi) = (1.0, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi.max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).floor().max(1.0) as usize)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be >= 0, got {v}"
        )))
    }
}

/// √D^{1-2/p} R² a_D⁻², the ℓp bias term at truncation level D.
fn lp_bias(weights: &WeightSeq, p: f64, radius: f64, d: usize) -> Result<f64> {
    let a = weights.at(d)?;
    Ok((d as f64).sqrt().powf(1.0 - 2.0 / p) * radius * radius / (a * a))
}

fn check_lp(p: f64, radius: f64) -> Result<()> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "lp exponent must lie in (0,2), got {p}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

/// The two ℓp lower-bound components at level D (k = ⌈√D⌉, so D ≥ 2):
///
/// ρ₁(D) = max_{0≤l≤D-k} ( √D^{1-2/p} R² a_D⁻² · Σ²_{l,k}/Σ²_{D-k,k}
///                          ∧ Σ²_{l,k} ln(1+√(1-l/D)) )
/// ρ₂(D) = √D^{1-2/p} R² a_D⁻² ∧ (Σ_{j=D-k+1}^D σ_(j)⁴)^{1/2}
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpLower {
    pub rho1: f64,
    pub rho2: f64,
}

pub fn lp_lower_bound(
    weights: &WeightSeq,
    p: f64,
    radius: f64,
    profile: &VarianceProfile,
    d: usize,
) -> Result<LpLower> {
    check_lp(p, radius)?;
    let k = ceil_sqrt_convention(d);
    if k > d {
        return Err(Error::InvalidParameter(format!(
            "lp lower bound needs ceil(sqrt(D)) <= D, got D={d} (k={k})"
        )));
    }
    let prefix = OrderedPrefix::build(profile, d)?;
    let bias = lp_bias(weights, p, radius, d)?;
    let top_block = prefix.block(d - k, k);
    let rho1 = (0..=d - k)
        .map(|l| {
            let block = prefix.block(l, k);
            let spread = block * (1.0 + (1.0 - l as f64 / d as f64).sqrt()).ln();
            (bias * block / top_block).min(spread)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let rho2 = bias.min(prefix.tail_fourth(d, k));
    Ok(LpLower { rho1, rho2 })
}

/// sup_D (ρ²_{⌈√D⌉,D} ∧ √D^{1-2/p} R² a_D⁻²), the combined ℓp lower bound
/// for monotone noise profiles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpCombined {
    pub value: f64,
    pub arg_d: usize,
}

pub fn lp_rate_combined(
    weights: &WeightSeq,
    p: f64,
    radius: f64,
    profile: &VarianceProfile,
) -> Result<LpCombined> {
    check_lp(p, radius)?;
    if !profile.is_nondecreasing() {
        return Err(Error::InvalidParameter(
            "the combined lp rate applies to nondecreasing noise profiles".into(),
        ));
    }
    let n = profile.horizon();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "the combined lp rate needs horizon >= 2".into(),
        ));
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg_d = 2;
    for d in 2..=n {
        let k = ceil_sqrt_convention(d);
        let term = rho_kn_sq(profile, k, d)?.min(lp_bias(weights, p, radius, d)?);
        if term > best {
            best = term;
            arg_d = d;
        }
    }
    Ok(LpCombined { value: best, arg_d })
}

/// D† = inf{D : R² a_D⁻² √D^{1-2/p} ≤ ρ²_{⌈√D⌉,D}}, scanned over 2..=N;
/// N when the set is empty.
pub fn d_dagger(
    weights: &WeightSeq,
    p: f64,
    radius: f64,
    profile: &VarianceProfile,
    n: usize,
) -> Result<usize> {
    check_lp(p, radius)?;
    if n < 2 || n > profile.horizon() {
        return Err(Error::InvalidParameter(format!(
            "d_dagger needs 2 <= N <= horizon, got N={n}, horizon={}",
            profile.horizon()
        )));
    }
    for d in 2..=n {
        let k = ceil_sqrt_convention(d);
        if lp_bias(weights, p, radius, d)? <= rho_kn_sq(profile, k, d)? {
            return Ok(d);
        }
    }
    Ok(n)
}

/// Ill-posedness regime for the ℓp upper-bound multiplier λ_σ. The field
/// records the profile exponent for provenance; it does not enter the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    /// σ_j ~ j^t
    Mildly { t: f64 },
    /// σ_j ~ e^{γ j}
    Severely { gamma: f64 },
}

/// λ_σ, the logarithmic factor separating the ℓp upper bound from the lower
/// bound: ln(N) (mild) or ln(N)·√(D†)^{1-p/2} (severe), with the unspecified
/// constant reported as 1.
pub fn lp_lambda(regime: &Regime, n: usize, d_dagger: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("lambda needs N >= 2".into()));
    }
    if d_dagger > n {
        return Err(Error::InvalidParameter(format!(
            "d_dagger {d_dagger} exceeds N {n}"
        )));
    }
    let log_n = (n as f64).ln();
    Ok(match regime {
        Regime::Mildly { .. } => log_n,
        Regime::Severely { .. } => log_n * (d_dagger as f64).sqrt().powf(1.0 - p / 2.0),
    })
}

/// Which side of the minimax sandwich a reported rate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// A named rate value with its provenance, as emitted by the CLI table.
#[derive(Debug, Clone, Serialize)]
pub struct RateResult {
    pub name: String,
    pub side: Side,
    pub value: f64,
    /// Free-form "k=…, n=…, l=…" argument record.
    pub args: String,
}

impl RateResult {
    pub fn new(name: impl Into<String>, side: Side, value: f64, args: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            side,
            value,
            args: args.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn c_alpha_beta_reference_value() {
        let c = c_alpha_beta(0.05, 0.05).unwrap();
        assert!(close(c, (2.0 * (1.0 + 4.0 * 0.81f64).ln()).sqrt(), 1e-15));
        assert!((c - 1.6997).abs() < 1e-4);
        // Vanishes as alpha+beta -> 1 and is monotone in both levels.
        assert!(c_alpha_beta(0.5, 0.499).unwrap() < 0.01);
        assert!(c_alpha_beta(0.1, 0.05).unwrap() < c);
        assert!(c_alpha_beta(0.05, 0.1).unwrap() < c);
        assert!(c_alpha_beta(0.5, 0.5).is_err());
    }

    #[test]
    fn rho_d_sq_values_and_monotonicity() {
        let p = VarianceProfile::constant(1.0, 8).unwrap();
        let c = c_alpha_beta(0.05, 0.05).unwrap();
        let r4 = rho_d_sq(&p, 4, 0.05, 0.05).unwrap();
        assert!(close(r4, c * 2.0, 1e-12));
        assert!((r4 - 3.400).abs() < 1e-3);
        let mut prev = 0.0;
        for d in 1..=8 {
            let r = rho_d_sq(&p, d, 0.05, 0.05).unwrap();
            assert!(r >= prev);
            prev = r;
        }
        // Homoscedastic closed form c σ² √D.
        let p = VarianceProfile::constant(0.5, 9).unwrap();
        let r = rho_d_sq(&p, 9, 0.05, 0.05).unwrap();
        assert!(close(r, c * 0.25 * 3.0, 1e-12));
    }

    #[test]
    fn rho_kn_sq_hand_enumerated_instance() {
        // σ_j = j, k=1, n=2: max(ln 3, 4 ln 2, 4) = 4.
        let p = VarianceProfile::polynomial(1.0, 1.0, 2).unwrap();
        let r = rho_kn_sq(&p, 1, 2).unwrap();
        assert!(close(r, 4.0, 1e-12));
        let blocks = sparse_block_max(&p, 1, 2).unwrap();
        assert!(close(blocks, 4.0 * 2f64.ln(), 1e-12));
    }

    #[test]
    fn rho_kn_sq_homoscedastic_block_at_l0() {
        let sigma = 1.3f64;
        let (k, n) = (3usize, 20usize);
        let p = VarianceProfile::constant(sigma, n).unwrap();
        let expected = sigma * sigma * k as f64 * log_term(n as f64 / (k * k) as f64).max(0.0);
        // For constant profiles every l gives a smaller log factor than l=0.
        assert!(close(sparse_block_max(&p, k, n).unwrap(), expected, 1e-12));
    }

    #[test]
    fn rho_kn_sq_k_equals_n() {
        let p = VarianceProfile::explicit(vec![1.0, 3.0, 2.0]).unwrap();
        let r = rho_kn_sq(&p, 3, 3).unwrap();
        let tail = (1.0f64 + 81.0 + 16.0).sqrt();
        assert!(r >= tail);
    }

    #[test]
    fn rho_n_inf_values() {
        let p = VarianceProfile::constant(2.0, 10).unwrap();
        assert!(close(
            rho_n_inf(&p, 10).unwrap(),
            2.0 * 11f64.ln().sqrt(),
            1e-12
        ));
        let p1 = VarianceProfile::explicit(vec![1.5]).unwrap();
        assert!(close(
            rho_n_inf(&p1, 1).unwrap(),
            1.5 * 2f64.ln().sqrt(),
            1e-12
        ));
        // Exponential growth: dominated by the largest levels, value >= σ_(n)·√ln2.
        let e = VarianceProfile::exponential(1.0, 1.0, 12).unwrap();
        let r = rho_n_inf(&e, 12).unwrap();
        assert!(r >= e.sigma_at(12).unwrap() * 2f64.ln().sqrt());
    }

    #[test]
    fn sparse_upper_channels() {
        let p = VarianceProfile::constant(1.0, 10).unwrap();
        let up = sparse_upper_sq(&p, 1, 10, 0.05, 0.05).unwrap();
        assert!(close(up.threshold_channel, 10f64.ln(), 1e-12));
        assert!(close(up.l2_channel, 10f64.sqrt(), 1e-12));
        assert!(up.threshold_channel < up.l2_channel);
        assert!(close(
            up.value,
            up.max_constant * up.threshold_channel,
            1e-12
        ));

        // k = n on a constant profile: the l2 channel wins when √n <= n ln n.
        let up = sparse_upper_sq(&p, 10, 10, 0.05, 0.05).unwrap();
        assert!(close(up.value, up.chisq_constant * up.l2_channel, 1e-12));

        // Nondecreasing in k through the threshold channel.
        let q = VarianceProfile::polynomial(1.0, 1.0, 12).unwrap();
        let mut prev = 0.0;
        for k in 1..=12 {
            let u = sparse_upper_sq(&q, k, 12, 0.05, 0.05).unwrap();
            assert!(u.threshold_channel >= prev);
            prev = u.threshold_channel;
        }
    }

    #[test]
    fn ellipsoid_bounds_structure() {
        let profile = VarianceProfile::polynomial(0.1, 1.0, 50).unwrap();
        let w = WeightSeq::polynomial(2.0).unwrap();
        let b = ellipsoid_rate_bounds(&w, 1.0, &profile, 0.05, 0.05).unwrap();
        assert!(b.lower <= b.upper);
        assert!(b.lower_arg_d >= 1 && b.upper_arg_d <= 50);

        // Huge radius: bias never binds, lower = ρ²_horizon.
        let b = ellipsoid_rate_bounds(&w, 1e12, &profile, 0.05, 0.05).unwrap();
        let rho_full = rho_d_sq(&profile, 50, 0.05, 0.05).unwrap();
        assert!(close(b.lower, rho_full, 1e-12));
        assert_eq!(b.lower_arg_d, 50);

        // Constant weights with tiny radius: the bias term dominates the min
        // everywhere, so the lower bound equals R²/a².
        let wc = WeightSeq::explicit(vec![1.0; 50]).unwrap();
        let rho1 = rho_d_sq(&profile, 1, 0.05, 0.05).unwrap();
        let r = (rho1 / 2.0).sqrt();
        let b = ellipsoid_rate_bounds(&wc, r, &profile, 0.05, 0.05).unwrap();
        assert!(close(b.lower, r * r, 1e-12));
    }

    #[test]
    fn rate_table_entries() {
        let f = rate_table_entry(&RateCase::PolyPoly { s: 2.0, t: 1.0 }, 0.1, 0.05, 0.05).unwrap();
        assert!(close(f, 0.1f64.powf(8.0 / 6.5), 1e-12));
        assert!((f - 0.0588).abs() < 1e-3);

        let f = rate_table_entry(
            &RateCase::PolyExp {
                s: 1.0,
                gamma: 1.0,
                r: 1.0,
            },
            (-5f64).exp(),
            0.05,
            0.05,
        )
        .unwrap();
        assert!(close(f, 0.01, 1e-12));

        // All four entries vanish as σ -> 0.
        let cases = [
            RateCase::PolyPoly { s: 1.0, t: 0.5 },
            RateCase::ExpPoly {
                nu: 1.0,
                s: 1.0,
                t: 0.5,
            },
            RateCase::PolyExp {
                s: 1.0,
                gamma: 0.5,
                r: 1.0,
            },
            RateCase::ExpExp {
                nu: 1.0,
                s: 1.0,
                gamma: 0.5,
                r: 1.0,
            },
        ];
        for case in cases {
            let f1 = rate_table_entry(&case, 1e-2, 0.05, 0.05).unwrap();
            let f2 = rate_table_entry(&case, 1e-4, 0.05, 0.05).unwrap();
            assert!(f2 < f1, "{case:?}: {f2} !< {f1}");
        }
        assert!(rate_table_entry(
            &RateCase::ExpExp {
                nu: 1.0,
                s: 1.5,
                gamma: 0.5,
                r: 1.0
            },
            0.1,
            0.05,
            0.05
        )
        .is_err());
    }

    #[test]
    fn lp_lower_bound_constant_profile() {
        // Constant σ: the variance ratio is 1, so ρ₁ maximizes at l=0.
        let sigma = 1.0;
        let d = 9usize;
        let k = ceil_sqrt_convention(d); // 4 under the ⌊·⌋+1 convention
        let p = VarianceProfile::constant(sigma, d).unwrap();
        let w = WeightSeq::polynomial(1.0).unwrap();
        let lp = lp_lower_bound(&w, 1.0, 1.0, &p, d).unwrap();
        let bias = (d as f64).sqrt().powf(1.0 - 2.0) / (d * d) as f64;
        let spread_l0 = k as f64 * (1.0 + 1.0f64).ln();
        assert!(close(lp.rho1, bias.min(spread_l0), 1e-12));
        // rho2 with huge radius reduces to the tail fourth-moment term.
        let lp = lp_lower_bound(&w, 1.0, 1e9, &p, d).unwrap();
        assert!(close(lp.rho2, (k as f64).sqrt(), 1e-12));
        // D too small for the ceiling convention.
        assert!(lp_lower_bound(&w, 1.0, 1.0, &p, 1).is_err());
    }

    #[test]
    fn lp_combined_scan_behaviour() {
        let profile = VarianceProfile::constant(0.5, 40).unwrap();
        let w = WeightSeq::polynomial(1.0).unwrap();
        let c = lp_rate_combined(&w, 1.0, 1.0, &profile).unwrap();
        // sup dominates each scanned term.
        for d in [2usize, 5, 17, 40] {
            let k = ceil_sqrt_convention(d);
            let term = rho_kn_sq(&profile, k, d)
                .unwrap()
                .min(lp_bias(&w, 1.0, 1.0, d).unwrap());
            assert!(c.value >= term - 1e-12);
        }
        // Radius -> 0 collapses the bias channel and hence the sup.
        let tiny = lp_rate_combined(&w, 1.0, 1e-8, &profile).unwrap();
        assert!(tiny.value < 1e-12);
    }

    #[test]
    fn lp_combined_argmax_sits_at_the_channel_crossing() {
        // Constant σ, a_D = D^s: the sup is attained where the increasing
        // sparse rate meets the decreasing bias term, found here by an
        // independent brute-force scan for the crossing point.
        let profile = VarianceProfile::constant(1.0, 60).unwrap();
        for (s, p, radius) in [(1.0, 1.0, 2.0), (2.0, 1.0, 5.0), (1.5, 0.8, 3.0)] {
            let w = WeightSeq::polynomial(s).unwrap();
            let combined = lp_rate_combined(&w, p, radius, &profile).unwrap();
            let crossing = (2..=60)
                .find(|&d| {
                    let k = ceil_sqrt_convention(d);
                    let bias = (d as f64).sqrt().powf(1.0 - 2.0 / p) * radius * radius
                        / (d as f64).powf(2.0 * s);
                    rho_kn_sq(&profile, k, d).unwrap() >= bias
                })
                .unwrap_or(60);
            assert!(
                combined.arg_d.abs_diff(crossing) <= 1,
                "s={s}, p={p}, R={radius}: argmax {} vs crossing {crossing}",
                combined.arg_d
            );
        }
    }

    #[test]
    fn d_dagger_limits() {
        let profile = VarianceProfile::polynomial(1.0, 1.0, 20).unwrap();
        let w = WeightSeq::polynomial(1.0).unwrap();
        assert_eq!(d_dagger(&w, 1.0, 1e-9, &profile, 20).unwrap(), 2);
        assert_eq!(d_dagger(&w, 1.0, 1e9, &profile, 20).unwrap(), 20);
    }

    #[test]
    fn lambda_values() {
        let lam = lp_lambda(&Regime::Mildly { t: 1.0 }, 7, 3, 1.0).unwrap();
        assert!(close(lam, 7f64.ln(), 1e-12));
        // Severe regime with p=2 collapses the D† factor.
        let lam = lp_lambda(&Regime::Severely { gamma: 0.3 }, 50, 9, 2.0).unwrap();
        assert!(close(lam, 50f64.ln(), 1e-12));
        let lam3 = lp_lambda(&Regime::Severely { gamma: 0.3 }, 50, 9, 1.0).unwrap();
        assert!(close(lam3, 50f64.ln() * 3f64.sqrt(), 1e-12));
        // Nondecreasing in N.
        assert!(
            lp_lambda(&Regime::Mildly { t: 1.0 }, 100, 3, 1.0).unwrap()
                > lp_lambda(&Regime::Mildly { t: 1.0 }, 10, 3, 1.0).unwrap()
        );
    }

    #[test]
    fn polynomial_regime_block_comparison() {
        // For σ_j = j^γ: Σ²_{⌊n/2⌋,k} ≥ 2^{-2γ} Σ²_{n-k,k} whenever k ≤ n/2.
        for gamma in [0.25, 0.5, 1.0, 2.0] {
            for n in [6usize, 11, 20, 33] {
                for k in 1..=n / 2 {
                    let p = VarianceProfile::polynomial(1.0, gamma, n).unwrap();
                    let mid = p.sigma_block(n / 2, k, n).unwrap();
                    let top = p.sigma_block(n - k, k, n).unwrap();
                    assert!(
                        mid >= 0.25f64.powf(gamma) * top - 1e-12,
                        "gamma={gamma}, n={n}, k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn exponential_regime_tail_dominance() {
        // For exponential growth the sparse rate is at least σ_(n)².
        for gamma in [0.2, 0.5, 1.0] {
            for n in [5usize, 10, 16] {
                for k in [1usize, 2, n / 2 + 1] {
                    let p = VarianceProfile::exponential(1.0, gamma, n).unwrap();
                    let r = rho_kn_sq(&p, k.min(n), n).unwrap();
                    let top = p.sigma_at(n).unwrap();
                    assert!(r >= top * top - 1e-9, "gamma={gamma}, n={n}, k={k}");
                }
            }
        }
    }

    #[test]
    fn sup_norm_rate_matches_k1_block_term() {
        // For k=1 the log arguments coincide on n-l >= 1, so the block part
        // of the sparse rate squares the sup-norm rate exactly.
        for profile in [
            VarianceProfile::constant(1.0, 15).unwrap(),
            VarianceProfile::polynomial(1.0, 0.7, 15).unwrap(),
            VarianceProfile::explicit(vec![2.0, 1.0, 5.0, 0.3, 4.0]).unwrap(),
        ] {
            let n = profile.horizon();
            let blocks = sparse_block_max(&profile, 1, n).unwrap();
            let inf = rho_n_inf(&profile, n).unwrap();
            assert!(close(blocks, inf * inf, 1e-12));
        }
    }
}
