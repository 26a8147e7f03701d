//! The test procedures: the truncated χ² test, the max (thresholding) test,
//! their Bonferroni combination, single-coordinate two-sided tests, and the
//! two-branch ℓp test split at D†.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LpBody, VarianceProfile};
use crate::quantiles::{
    gaussian_abs_quantile, max_chisq_quantile, weighted_chisq_quantile, QuantileMethod,
};
use crate::rates::d_dagger;

/// Default Monte Carlo settings for χ² thresholds (no closed form exists for
/// unequal weights).
pub const DEFAULT_THRESHOLD_REPS: u64 = 1_000_000;
pub const DEFAULT_THRESHOLD_SEED: u64 = 0x5147_3ab1;

/// Which statistic a procedure rejects on.
#[derive(Debug, Clone, PartialEq)]
pub enum TestKind {
    /// Reject when Σ_{j≤D} Y_j² exceeds t_{D,1-α}(σ).
    Chisq { d: usize },
    /// Reject when max_{j≤n} Y_j²/σ_j² exceeds q_{n,1-α}.
    Max { n: usize },
    /// Reject when either sub-test at level α/2 rejects.
    Combined { n: usize },
    /// Reject when |Y_j| ≥ σ_j z_{1-α/2}.
    Local { j: usize },
    /// χ² branch on 1..=D† at level α/2 plus local branches at levels
    /// 3α/(π²(j-D†)²) for j > D†; reject when any branch rejects.
    SparseDagger { class: LpBody },
}

/// A configured, reproducible decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TestProcedure {
    pub kind: TestKind,
    pub level: f64,
    pub quantile: QuantileMethod,
}

impl TestProcedure {
    pub fn new(kind: TestKind, level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidLevel(level));
        }
        let quantile = match kind {
            TestKind::Chisq { .. } | TestKind::Combined { .. } | TestKind::SparseDagger { .. } => {
                QuantileMethod::MonteCarlo {
                    reps: DEFAULT_THRESHOLD_REPS,
                    seed: DEFAULT_THRESHOLD_SEED,
                }
            }
            TestKind::Max { .. } | TestKind::Local { .. } => QuantileMethod::Exact,
        };
        Ok(Self {
            kind,
            level,
            quantile,
        })
    }

    pub fn with_quantile(mut self, method: QuantileMethod) -> Self {
        self.quantile = method;
        self
    }

    /// Resolve all thresholds against a profile. The result is immutable and
    /// cheap to evaluate, so Monte Carlo loops prepare once and share it.
    pub fn prepare(&self, profile: &VarianceProfile) -> Result<PreparedTest> {
        let inner = match &self.kind {
            TestKind::Chisq { d } => {
                check_range(*d, profile, "D")?;
                PreparedKind::Chisq {
                    d: *d,
                    threshold: weighted_chisq_quantile(profile, *d, self.level, &self.quantile)?,
                }
            }
            TestKind::Max { n } => {
                check_range(*n, profile, "n")?;
                PreparedKind::Max {
                    n: *n,
                    inv_sigmas: inverse_sigmas(profile, *n)?,
                    threshold: max_chisq_quantile(*n, self.level, &self.quantile)?,
                }
            }
            TestKind::Combined { n } => {
                check_range(*n, profile, "n")?;
                let half = self.level / 2.0;
                PreparedKind::Combined {
                    chisq: Box::new(PreparedKind::Chisq {
                        d: *n,
                        threshold: weighted_chisq_quantile(profile, *n, half, &self.quantile)?,
                    }),
                    max: Box::new(PreparedKind::Max {
                        n: *n,
                        inv_sigmas: inverse_sigmas(profile, *n)?,
                        threshold: max_chisq_quantile(*n, half, &QuantileMethod::Exact)?,
                    }),
                }
            }
            TestKind::Local { j } => {
                check_range(*j, profile, "j")?;
                PreparedKind::Local {
                    j: *j,
                    threshold: gaussian_abs_quantile(profile.sigma_at(*j)?, self.level)?,
                }
            }
            TestKind::SparseDagger { class } => {
                let n = profile.horizon();
                let dag = d_dagger(&class.weights, class.p, class.radius, profile, n)?;
                let half = self.level / 2.0;
                let chisq = Box::new(PreparedKind::Chisq {
                    d: dag,
                    threshold: weighted_chisq_quantile(profile, dag, half, &self.quantile)?,
                });
                let mut locals = Vec::with_capacity(n - dag);
                for j in dag + 1..=n {
                    let m = (j - dag) as f64;
                    let level = 3.0 * self.level / (std::f64::consts::PI.powi(2) * m * m);
                    locals.push((j, gaussian_abs_quantile(profile.sigma_at(j)?, level)?));
                }
                PreparedKind::SparseDagger {
                    d_dagger: dag,
                    chisq,
                    locals,
                }
            }
        };
        Ok(PreparedTest { inner })
    }
}

fn check_range(v: usize, profile: &VarianceProfile, what: &str) -> Result<()> {
    if v < 1 || v > profile.horizon() {
        return Err(Error::InvalidParameter(format!(
            "{what}={v} outside 1..={}",
            profile.horizon()
        )));
    }
    Ok(())
}

fn inverse_sigmas(profile: &VarianceProfile, n: usize) -> Result<Vec<f64>> {
    Ok(profile.sigmas(n)?.iter().map(|s| 1.0 / s).collect())
}

#[derive(Debug, Clone)]
enum PreparedKind {
    Chisq {
        d: usize,
        threshold: f64,
    },
    Max {
        n: usize,
        inv_sigmas: Vec<f64>,
        threshold: f64,
    },
    Combined {
        chisq: Box<PreparedKind>,
        max: Box<PreparedKind>,
    },
    Local {
        j: usize,
        threshold: f64,
    },
    SparseDagger {
        d_dagger: usize,
        chisq: Box<PreparedKind>,
        locals: Vec<(usize, f64)>,
    },
}

/// A procedure with thresholds resolved; evaluation is pure.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    inner: PreparedKind,
}

impl PreparedTest {
    pub fn evaluate(&self, y: &[f64]) -> Result<TestOutcome> {
        self.inner.evaluate(y)
    }

    /// The resolved D† of a two-branch ℓp test, if this is one.
    pub fn d_dagger(&self) -> Option<usize> {
        match &self.inner {
            PreparedKind::SparseDagger { d_dagger, .. } => Some(*d_dagger),
            _ => None,
        }
    }
}

impl PreparedKind {
    fn required_len(&self) -> usize {
        match self {
            Self::Chisq { d, .. } => *d,
            Self::Max { n, .. } => *n,
            Self::Combined { chisq, max } => chisq.required_len().max(max.required_len()),
            Self::Local { j, .. } => *j,
            Self::SparseDagger { chisq, locals, .. } => locals
                .last()
                .map(|(j, _)| *j)
                .unwrap_or(0)
                .max(chisq.required_len()),
        }
    }

    fn evaluate(&self, y: &[f64]) -> Result<TestOutcome> {
        let need = self.required_len();
        if y.len() < need {
            return Err(Error::InvalidParameter(format!(
                "observation has {} coordinates, test needs {need}",
                y.len()
            )));
        }
        Ok(match self {
            Self::Chisq { d, threshold } => {
                let statistic: f64 = y[..*d].iter().map(|v| v * v).sum();
                TestOutcome::atomic(statistic > *threshold, statistic, *threshold)
            }
            Self::Max {
                n,
                inv_sigmas,
                threshold,
            } => {
                let statistic = y[..*n]
                    .iter()
                    .zip(inv_sigmas)
                    .map(|(v, inv)| (v * inv) * (v * inv))
                    .fold(f64::NEG_INFINITY, f64::max);
                TestOutcome::atomic(statistic > *threshold, statistic, *threshold)
            }
            Self::Combined { chisq, max } => {
                let sub = vec![chisq.evaluate(y)?, max.evaluate(y)?];
                TestOutcome::composite(sub)
            }
            Self::Local { j, threshold } => {
                let statistic = y[*j - 1].abs();
                // The local rule rejects on the closed threshold set |Y_j| ≥ q.
                TestOutcome::atomic(statistic >= *threshold, statistic, *threshold)
            }
            Self::SparseDagger { chisq, locals, .. } => {
                let mut sub = vec![chisq.evaluate(y)?];
                for (j, threshold) in locals {
                    let statistic = y[*j - 1].abs();
                    sub.push(TestOutcome::atomic(
                        statistic >= *threshold,
                        statistic,
                        *threshold,
                    ));
                }
                TestOutcome::composite(sub)
            }
        })
    }
}

/// The decision record of a test run. Atomic tests carry their statistic and
/// threshold; composite tests carry their sub-outcomes and reject when any
/// sub-outcome rejects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub reject: bool,
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sub: Vec<TestOutcome>,
}

impl TestOutcome {
    fn atomic(reject: bool, statistic: f64, threshold: f64) -> Self {
        Self {
            reject,
            statistic: Some(statistic),
            threshold: Some(threshold),
            sub: Vec::new(),
        }
    }

    fn composite(sub: Vec<TestOutcome>) -> Self {
        Self {
            reject: sub.iter().any(|o| o.reject),
            statistic: None,
            threshold: None,
            sub,
        }
    }
}

/// One-line constructors mirroring the individual procedures.
pub fn chisq_test(
    y: &[f64],
    profile: &VarianceProfile,
    d: usize,
    alpha: f64,
    quantile: &QuantileMethod,
) -> Result<TestOutcome> {
    TestProcedure::new(TestKind::Chisq { d }, alpha)?
        .with_quantile(*quantile)
        .prepare(profile)?
        .evaluate(y)
}

pub fn max_test(y: &[f64], profile: &VarianceProfile, n: usize, alpha: f64) -> Result<TestOutcome> {
    TestProcedure::new(TestKind::Max { n }, alpha)?
        .prepare(profile)?
        .evaluate(y)
}

pub fn combined_test(
    y: &[f64],
    profile: &VarianceProfile,
    n: usize,
    alpha: f64,
    quantile: &QuantileMethod,
) -> Result<TestOutcome> {
    TestProcedure::new(TestKind::Combined { n }, alpha)?
        .with_quantile(*quantile)
        .prepare(profile)?
        .evaluate(y)
}

pub fn local_test(
    y: &[f64],
    profile: &VarianceProfile,
    j: usize,
    level: f64,
) -> Result<TestOutcome> {
    TestProcedure::new(TestKind::Local { j }, level)?
        .prepare(profile)?
        .evaluate(y)
}

pub fn sparse_dagger_test(
    y: &[f64],
    profile: &VarianceProfile,
    class: &LpBody,
    alpha: f64,
    quantile: &QuantileMethod,
) -> Result<TestOutcome> {
    TestProcedure::new(
        TestKind::SparseDagger {
            class: class.clone(),
        },
        alpha,
    )?
    .with_quantile(*quantile)
    .prepare(profile)?
    .evaluate(y)
}
