//! Observation model: heteroscedastic Gaussian sequences Y_j = θ_j + σ_j ε_j
//! over the index set {1, ..., N}, together with the signal classes the tests
//! and rate formulas quantify over.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::NoiseSource;

/// Maximum horizon accepted when a horizon is derived from a noise level.
pub const MAX_HORIZON: usize = 1_000_000;

/// Default truncation horizon for countable index sets: ⌈σ⁻²⌉ capped at 10⁶.
pub fn default_horizon(sigma: f64) -> usize {
    let n = (1.0 / (sigma * sigma)).ceil();
    if n.is_finite() && n >= 1.0 {
        (n as usize).min(MAX_HORIZON)
    } else {
        MAX_HORIZON
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ProfileKind {
    Constant {
        sigma: f64,
    },
    /// σ_j = σ · j^γ
    Polynomial {
        sigma: f64,
        gamma: f64,
    },
    /// σ_j = σ · e^{γ j}
    Exponential {
        sigma: f64,
        gamma: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

/// The known standard deviation sequence (σ_j)_{j ≤ N}.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    kind: ProfileKind,
    horizon: usize,
}

impl VarianceProfile {
    pub fn constant(sigma: f64, horizon: usize) -> Result<Self> {
        check_sigma(sigma)?;
        check_horizon(horizon)?;
        Ok(Self {
            kind: ProfileKind::Constant { sigma },
            horizon,
        })
    }

    pub fn polynomial(sigma: f64, gamma: f64, horizon: usize) -> Result<Self> {
        check_sigma(sigma)?;
        check_horizon(horizon)?;
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial exponent must be >= 0, got {gamma}"
            )));
        }
        Ok(Self {
            kind: ProfileKind::Polynomial { sigma, gamma },
            horizon,
        })
    }

    pub fn exponential(sigma: f64, gamma: f64, horizon: usize) -> Result<Self> {
        check_sigma(sigma)?;
        check_horizon(horizon)?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exponential growth rate must be > 0, got {gamma}"
            )));
        }
        Ok(Self {
            kind: ProfileKind::Exponential { sigma, gamma },
            horizon,
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        check_horizon(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "explicit sigma_{} must be positive and finite, got {v}",
                    i + 1
                )));
            }
        }
        let horizon = values.len();
        Ok(Self {
            kind: ProfileKind::Explicit { values },
            horizon,
        })
    }

    /// Inverse-problem reduction: from observations Z_j = b_j θ_j + σ ε_j
    /// with singular values b_j > 0, the rescaled sequence Y_j = Z_j / b_j
    /// has noise levels σ_j = σ / b_j.
    pub fn from_inverse_problem(b: &[f64], sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let values = b
            .iter()
            .enumerate()
            .map(|(i, &bj)| {
                if bj > 0.0 && bj.is_finite() {
                    Ok(sigma / bj)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "singular value b_{} must be positive, got {bj}",
                        i + 1
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(values)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// σ_j for the 1-based coordinate j.
    pub fn sigma_at(&self, j: usize) -> Result<f64> {
        if j < 1 || j > self.horizon {
            return Err(Error::IndexOutOfRange {
                index: j,
                horizon: self.horizon,
            });
        }
        Ok(match &self.kind {
            ProfileKind::Constant { sigma } => *sigma,
            ProfileKind::Polynomial { sigma, gamma } => sigma * (j as f64).powf(*gamma),
            ProfileKind::Exponential { sigma, gamma } => sigma * (gamma * j as f64).exp(),
            ProfileKind::Explicit { values } => values[j - 1],
        })
    }

    /// (σ_1, ..., σ_n) in coordinate order.
    pub fn sigmas(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.horizon {
            return Err(Error::IndexOutOfRange {
                index: n,
                horizon: self.horizon,
            });
        }
        (1..=n).map(|j| self.sigma_at(j)).collect()
    }

    /// Order statistics σ_(1) ≤ ... ≤ σ_(n) of the first n noise levels
    /// (stable sort: ties keep coordinate order).
    pub fn ordered_variances(&self, n: usize) -> Result<Vec<f64>> {
        let mut v = self.sigmas(n)?;
        if !self.is_nondecreasing() {
            v.sort_by(|a, b| a.partial_cmp(b).expect("sigmas are finite"));
        }
        Ok(v)
    }

    /// Σ²_{l,k} = Σ_{j=l+1}^{l+k} σ_(j)², the sum of k consecutive squared
    /// order statistics of the first n levels, starting after rank l.
    pub fn sigma_block(&self, l: usize, k: usize, n: usize) -> Result<f64> {
        if k < 1 {
            return Err(Error::InvalidParameter("block size k must be >= 1".into()));
        }
        if l + k > n {
            return Err(Error::InvalidParameter(format!(
                "block (l={l}, k={k}) exceeds window n={n}"
            )));
        }
        let ordered = self.ordered_variances(n)?;
        Ok(ordered[l..l + k].iter().map(|s| s * s).sum())
    }

    /// True when σ_j is nondecreasing in j, in which case order statistics
    /// coincide with the raw sequence.
    pub fn is_nondecreasing(&self) -> bool {
        match &self.kind {
            ProfileKind::Constant { .. }
            | ProfileKind::Polynomial { .. }
            | ProfileKind::Exponential { .. } => true,
            ProfileKind::Explicit { values } => values.windows(2).all(|w| w[0] <= w[1]),
        }
    }

    /// Draw Y_j = θ_j + σ_j ε_j for j = 1..=horizon. The ε draws are
    /// addressed by (noise seed, replicate, j), so the observation is
    /// reproducible and independent of evaluation order.
    pub fn sample(
        &self,
        signal: &Signal,
        noise: &NoiseSource,
        replicate: u64,
    ) -> Result<Observation> {
        if let Some(&j) = signal.support().last() {
            if j > self.horizon {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    horizon: self.horizon,
                });
            }
        }
        let values = self.sample_prefix(signal, noise, replicate, self.horizon)?;
        Ok(Observation {
            values,
            seed: noise.seed(),
            replicate,
        })
    }

    /// First n coordinates of the observation only. Because draws are
    /// addressed per coordinate, this equals the prefix of a full sample.
    pub fn sample_prefix(
        &self,
        signal: &Signal,
        noise: &NoiseSource,
        replicate: u64,
        n: usize,
    ) -> Result<Vec<f64>> {
        if n > self.horizon {
            return Err(Error::IndexOutOfRange {
                index: n,
                horizon: self.horizon,
            });
        }
        let eps = noise.normal_row(replicate, n);
        Ok((1..=n)
            .map(|j| signal.value_at(j) + self.sigma_at(j).expect("j <= n") * eps[j - 1])
            .collect())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise level must be positive and finite, got {sigma}"
        )))
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("horizon must be >= 1".into()))
    }
}

/// A mean sequence θ with finitely many nonzero entries, stored sparsely.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signal {
    entries: BTreeMap<usize, f64>,
}

impl Signal {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Build from (index, value) pairs; zero values are dropped, indices are
    /// 1-based and must be distinct.
    pub fn from_entries<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (j, v) in entries {
            if j < 1 {
                return Err(Error::InvalidParameter("signal indices are 1-based".into()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "signal entry at {j} must be finite, got {v}"
                )));
            }
            if v != 0.0 && map.insert(j, v).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate signal index {j}"
                )));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn value_at(&self, j: usize) -> f64 {
        self.entries.get(&j).copied().unwrap_or(0.0)
    }

    /// Nonzero support, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&j, &v)| (j, v))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// ‖θ‖₂² = Σ θ_j².
    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// ‖θ‖_∞ = max |θ_j|.
    pub fn sup_norm(&self) -> f64 {
        self.entries.values().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// θ ↦ c·θ.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(_, &v)| v * c != 0.0)
                .map(|(&j, &v)| (j, c * v))
                .collect(),
        }
    }
}

/// A monotone nondecreasing positive weight sequence (a_j), defining
/// ellipsoids and ℓp bodies.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSeq {
    /// a_j = j^s, s ≥ 0
    Polynomial {
        s: f64,
    },
    /// a_j = e^{ν j^s}, ν ≥ 0, s ≥ 0
    Exponential {
        nu: f64,
        s: f64,
    },
    Explicit(Vec<f64>),
}

impl WeightSeq {
    pub fn polynomial(s: f64) -> Result<Self> {
        if s >= 0.0 {
            Ok(Self::Polynomial { s })
        } else {
            Err(Error::InvalidParameter(format!(
                "polynomial weight exponent must be >= 0, got {s}"
            )))
        }
    }

    pub fn exponential(nu: f64, s: f64) -> Result<Self> {
        if nu >= 0.0 && s >= 0.0 {
            Ok(Self::Exponential { nu, s })
        } else {
            Err(Error::InvalidParameter(format!(
                "exponential weights need nu >= 0 and s >= 0, got nu={nu}, s={s}"
            )))
        }
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("weight sequence is empty".into()));
        }
        for w in values.windows(2) {
            if !(w[0] <= w[1]) {
                return Err(Error::InvalidParameter(
                    "weights must be nondecreasing".into(),
                ));
            }
        }
        if !(values[0] > 0.0) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        Ok(Self::Explicit(values))
    }

    /// a_j for 1-based j.
    pub fn at(&self, j: usize) -> Result<f64> {
        if j < 1 {
            return Err(Error::InvalidParameter("weight indices are 1-based".into()));
        }
        match self {
            Self::Polynomial { s } => Ok((j as f64).powf(*s)),
            Self::Exponential { nu, s } => Ok((nu * (j as f64).powf(*s)).exp()),
            Self::Explicit(values) => values.get(j - 1).copied().ok_or(Error::IndexOutOfRange {
                index: j,
                horizon: values.len(),
            }),
        }
    }
}

/// An ℓp body {θ : Σ a_j^p |θ_j|^p ≤ R^p} with 0 < p < 2.
#[derive(Debug, Clone, PartialEq)]
pub struct LpBody {
    pub weights: WeightSeq,
    pub p: f64,
    pub radius: f64,
}

impl LpBody {
    pub fn new(weights: WeightSeq, p: f64, radius: f64) -> Result<Self> {
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
        Ok(Self { weights, p, radius })
    }
}

/// Classes of alternatives the separation rates are stated over.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalClass {
    /// Signals vanishing beyond coordinate D.
    SD { d: usize },
    /// Signals supported on at most k of the first n coordinates.
    Sparse { k: usize, n: usize },
    /// Ellipsoid {θ : Σ a_j² θ_j² ≤ R²}.
    Ellipsoid { weights: WeightSeq, radius: f64 },
    /// ℓp body with 0 < p < 2. The defining sum uses |θ_j|^p.
    Lp(LpBody),
}

impl SignalClass {
    pub fn s_d(d: usize) -> Result<Self> {
        if d >= 1 {
            Ok(Self::SD { d })
        } else {
            Err(Error::InvalidParameter("S_D needs D >= 1".into()))
        }
    }

    pub fn sparse(k: usize, n: usize) -> Result<Self> {
        if k >= 1 && k <= n {
            Ok(Self::Sparse { k, n })
        } else {
            Err(Error::InvalidParameter(format!(
                "sparse class needs 1 <= k <= n, got k={k}, n={n}"
            )))
        }
    }

    pub fn ellipsoid(weights: WeightSeq, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Ellipsoid { weights, radius })
    }

    pub fn lp_body(weights: WeightSeq, p: f64, radius: f64) -> Result<Self> {
        Ok(Self::Lp(LpBody::new(weights, p, radius)?))
    }

    /// Exact evaluation of the class-defining constraint.
    pub fn contains(&self, signal: &Signal) -> Result<bool> {
        match self {
            Self::SD { d } => Ok(signal.support().iter().all(|&j| j <= *d)),
            Self::Sparse { k, n } => {
                let support = signal.support();
                Ok(support.iter().all(|&j| j <= *n) && support.len() <= *k)
            }
            Self::Ellipsoid { weights, radius } => {
                let mut sum = 0.0;
                for (j, v) in signal.iter() {
                    let a = weights.at(j)?;
                    sum += a * a * v * v;
                }
                Ok(sum <= radius * radius)
            }
            Self::Lp(body) => {
                let mut sum = 0.0;
                for (j, v) in signal.iter() {
                    sum += (body.weights.at(j)? * v.abs()).powf(body.p);
                }
                Ok(sum <= body.radius.powf(body.p))
            }
        }
    }
}

/// One draw of the observation sequence, with its seed provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
}
