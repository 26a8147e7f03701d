//! JSON-facing mirror types for profiles, signals, classes, tests, and
//! priors, with validation on conversion into the domain types. The schema
//! is documented in the repository README.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{BisectionSettings, Placement, RateFamily};
use crate::model::{LpBody, Signal, SignalClass, VarianceProfile, WeightSeq};
use crate::priors::PriorSpec;
use crate::procedures::{TestKind, TestProcedure};
use crate::quantiles::QuantileMethod;
use crate::rates::{RateCase, Regime};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        sigma: f64,
        horizon: usize,
    },
    /// σ_j = σ · j^γ
    Polynomial {
        sigma: f64,
        gamma: f64,
        horizon: usize,
    },
    /// σ_j = σ · e^{γ j}
    Exponential {
        sigma: f64,
        gamma: f64,
        horizon: usize,
    },
    Explicit {
        values: Vec<f64>,
    },
    /// σ_j = σ / b_j
    InverseProblem {
        b: Vec<f64>,
        sigma: f64,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<VarianceProfile> {
        match self {
            Self::Constant { sigma, horizon } => VarianceProfile::constant(*sigma, *horizon),
            Self::Polynomial {
                sigma,
                gamma,
                horizon,
            } => VarianceProfile::polynomial(*sigma, *gamma, *horizon),
            Self::Exponential {
                sigma,
                gamma,
                horizon,
            } => VarianceProfile::exponential(*sigma, *gamma, *horizon),
            Self::Explicit { values } => VarianceProfile::explicit(values.clone()),
            Self::InverseProblem { b, sigma } => VarianceProfile::from_inverse_problem(b, *sigma),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightsSpec {
    /// a_j = j^s
    Polynomial {
        s: f64,
    },
    /// a_j = e^{ν j^s}
    Exponential {
        nu: f64,
        s: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl WeightsSpec {
    pub fn build(&self) -> Result<WeightSeq> {
        match self {
            Self::Polynomial { s } => WeightSeq::polynomial(*s),
            Self::Exponential { nu, s } => WeightSeq::exponential(*nu, *s),
            Self::Explicit { values } => WeightSeq::explicit(values.clone()),
        }
    }
}

/// Sparse signal as a list of [index, value] pairs (1-based indices).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SignalSpec {
    pub entries: Vec<(usize, f64)>,
}

impl SignalSpec {
    pub fn build(&self) -> Result<Signal> {
        Signal::from_entries(self.entries.iter().copied())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassSpec {
    SD {
        d: usize,
    },
    Sparse {
        k: usize,
        n: usize,
    },
    Ellipsoid {
        weights: WeightsSpec,
        radius: f64,
    },
    LpBody {
        weights: WeightsSpec,
        p: f64,
        radius: f64,
    },
}

impl ClassSpec {
    pub fn build(&self) -> Result<SignalClass> {
        match self {
            Self::SD { d } => SignalClass::s_d(*d),
            Self::Sparse { k, n } => SignalClass::sparse(*k, *n),
            Self::Ellipsoid { weights, radius } => {
                SignalClass::ellipsoid(weights.build()?, *radius)
            }
            Self::LpBody { weights, p, radius } => {
                SignalClass::lp_body(weights.build()?, *p, *radius)
            }
        }
    }

    pub fn build_lp(&self) -> Result<LpBody> {
        match self.build()? {
            SignalClass::Lp(body) => Ok(body),
            _ => Err(Error::Config("expected an lp-body class".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuantileSpec {
    MonteCarlo { reps: u64, seed: u64 },
    AnalyticBound,
    Exact,
}

impl QuantileSpec {
    pub fn build(&self) -> Result<QuantileMethod> {
        match self {
            Self::MonteCarlo { reps, seed } => QuantileMethod::monte_carlo(*reps, *seed),
            Self::AnalyticBound => Ok(QuantileMethod::AnalyticBound),
            Self::Exact => Ok(QuantileMethod::Exact),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestSpec {
    Chisq {
        d: usize,
        level: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        quantile: Option<QuantileSpec>,
    },
    Max {
        n: usize,
        level: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        quantile: Option<QuantileSpec>,
    },
    Combined {
        n: usize,
        level: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        quantile: Option<QuantileSpec>,
    },
    Local {
        j: usize,
        level: f64,
    },
    SparseDagger {
        class: ClassSpec,
        level: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        quantile: Option<QuantileSpec>,
    },
}

impl TestSpec {
    pub fn build(&self) -> Result<TestProcedure> {
        let (kind, level, quantile) = match self {
            Self::Chisq { d, level, quantile } => (TestKind::Chisq { d: *d }, *level, quantile),
            Self::Max { n, level, quantile } => (TestKind::Max { n: *n }, *level, quantile),
            Self::Combined { n, level, quantile } => {
                (TestKind::Combined { n: *n }, *level, quantile)
            }
            Self::Local { j, level } => (TestKind::Local { j: *j }, *level, &None),
            Self::SparseDagger {
                class,
                level,
                quantile,
            } => (
                TestKind::SparseDagger {
                    class: class.build_lp()?,
                },
                *level,
                quantile,
            ),
        };
        let mut proc = TestProcedure::new(kind, level)?;
        if let Some(q) = quantile {
            proc = proc.with_quantile(q.build()?);
        }
        Ok(proc)
    }

    pub fn level(&self) -> f64 {
        match self {
            Self::Chisq { level, .. }
            | Self::Max { level, .. }
            | Self::Combined { level, .. }
            | Self::Local { level, .. }
            | Self::SparseDagger { level, .. } => *level,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    RademacherSd {
        d: usize,
        rho: f64,
    },
    SparseSubset {
        k: usize,
        n: usize,
        l: usize,
        rho: f64,
    },
    TailRademacher {
        k: usize,
        n: usize,
        rho: f64,
    },
}

impl PriorConfig {
    pub fn build(&self) -> Result<PriorSpec> {
        match self {
            Self::RademacherSd { d, rho } => PriorSpec::rademacher_sd(*d, *rho),
            Self::SparseSubset { k, n, l, rho } => PriorSpec::sparse_subset(*k, *n, *l, *rho),
            Self::TailRademacher { k, n, rho } => PriorSpec::tail_rademacher(*k, *n, *rho),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlacementSpec {
    WorstCaseTopVariances,
    FixedSupport(Vec<usize>),
    UniformPrior,
}

impl PlacementSpec {
    pub fn build(&self) -> Placement {
        match self {
            Self::WorstCaseTopVariances => Placement::WorstCaseTopVariances,
            Self::FixedSupport(v) => Placement::FixedSupport(v.clone()),
            Self::UniformPrior => Placement::UniformPrior,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BisectionSpec {
    #[serde(default = "default_max_iter")]
    pub max_iter: u32,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_point_reps")]
    pub point_reps: u64,
}

fn default_max_iter() -> u32 {
    20
}
fn default_rel_tol() -> f64 {
    0.02
}
fn default_point_reps() -> u64 {
    20_000
}

impl Default for BisectionSpec {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            rel_tol: default_rel_tol(),
            point_reps: default_point_reps(),
        }
    }
}

impl BisectionSpec {
    pub fn build(&self) -> BisectionSettings {
        BisectionSettings {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            point_reps: self.point_reps,
        }
    }
}

/// `quantile` subcommand: which null quantile to compute.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "kebab-case")]
pub enum QuantileTarget {
    /// t_{D,1-α}(σ)
    WeightedChisq { d: usize },
    /// q_{n,1-α}
    MaxChisq { n: usize },
    /// σ_j z_{1-α/2}
    GaussianAbs { j: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub profile: ProfileSpec,
    #[serde(flatten)]
    pub target: QuantileTarget,
    pub alpha: f64,
    #[serde(default)]
    pub quantile: Option<QuantileSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TestConfig {
    pub profile: ProfileSpec,
    pub test: TestSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RatesConfig {
    pub profile: ProfileSpec,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<SparseArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipsoid: Option<EllipsoidArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_body: Option<LpArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_table: Option<RateTableArgs>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SparseArgs {
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EllipsoidArgs {
    pub weights: WeightsSpec,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LpArgs {
    pub weights: WeightsSpec,
    pub p: f64,
    pub radius: f64,
    /// Truncation level for the per-D lower bound (defaults to the horizon).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Regime tag for the λ_σ multiplier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegimeSpec {
    Mildly { t: f64 },
    Severely { gamma: f64 },
}

impl RegimeSpec {
    pub fn build(&self) -> Regime {
        match self {
            Self::Mildly { t } => Regime::Mildly { t: *t },
            Self::Severely { gamma } => Regime::Severely { gamma: *gamma },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RateTableArgs {
    pub case: RateCaseSpec,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateCaseSpec {
    PolyPoly { s: f64, t: f64 },
    ExpPoly { nu: f64, s: f64, t: f64 },
    PolyExp { s: f64, gamma: f64, r: f64 },
    ExpExp { nu: f64, s: f64, gamma: f64, r: f64 },
}

impl RateCaseSpec {
    pub fn build(&self) -> RateCase {
        match *self {
            Self::PolyPoly { s, t } => RateCase::PolyPoly { s, t },
            Self::ExpPoly { nu, s, t } => RateCase::ExpPoly { nu, s, t },
            Self::PolyExp { s, gamma, r } => RateCase::PolyExp { s, gamma, r },
            Self::ExpExp { nu, s, gamma, r } => RateCase::ExpExp { nu, s, gamma, r },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub profile: ProfileSpec,
    pub prior: PriorConfig,
    pub alpha: f64,
    pub beta: f64,
    /// Optional Monte Carlo cross-check of E₀[L] and E₀[L²].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McArgs>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct McArgs {
    pub reps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub profile: ProfileSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    pub d: usize,
    pub x_grid: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LevelConfig {
    pub profile: ProfileSpec,
    pub test: TestSpec,
    pub reps: u64,
    pub seed: u64,
    /// Composite (Bonferroni) tests only need estimate ≤ α + 3 s.e.; exact
    /// tests are additionally checked from below.
    #[serde(default)]
    pub two_sided: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PowerConfig {
    pub profile: ProfileSpec,
    pub test: TestSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    pub reps: u64,
    pub seed: u64,
    #[serde(default = "default_prior_seed")]
    pub prior_seed: u64,
    /// Required minimum power; the command exits nonzero below it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_power: Option<f64>,
}

fn default_prior_seed() -> u64 {
    0x9e3779b97f4a7c15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SeparationConfig {
    pub profile: ProfileSpec,
    pub test: TestSpec,
    pub class: ClassSpec,
    pub beta: f64,
    pub placement: PlacementSpec,
    #[serde(default)]
    pub bisection: BisectionSpec,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub seed: u64,
    #[serde(default = "default_prior_seed")]
    pub prior_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScalingConfigSpec {
    pub family: RateFamilySpec,
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_level")]
    pub alpha: f64,
    #[serde(default = "default_level")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<QuantileSpec>,
    #[serde(default)]
    pub bisection: BisectionSpec,
    pub seed: u64,
    /// Accepted relative deviation of the fitted slope.
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
}

fn default_radius() -> f64 {
    1.0
}
fn default_level() -> f64 {
    0.05
}
fn default_slope_tolerance() -> f64 {
    0.15
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFamilySpec {
    PolyPoly { s: f64, t: f64 },
}

impl RateFamilySpec {
    pub fn build(&self) -> RateFamily {
        match *self {
            Self::PolyPoly { s, t } => RateFamily::PolyPoly { s, t },
        }
    }
}
