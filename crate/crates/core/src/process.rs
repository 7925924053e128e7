//! Linear process models and their truncated MA(∞) expansions.
//!
//! A model is a FARIMA(p, d, q) process
//! `φ(B)(1 − B)^d (X_t − μ) = θ(B) ε_t` with `φ(z) = 1 − φ₁z − … − φ_p z^p`
//! and `θ(z) = 1 + θ₁z + … + θ_q z^q`. The expansion
//! `X_t = μ + Σ a_i ε_{t−i}` is realized by convolving the ARMA impulse
//! response with the fractional binomial weights of `(1 − B)^{−d}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::scalar::Real;

/// Smallest admissible modulus of an AR root.
pub const CAUSALITY_MARGIN: f64 = 1e-9;

/// ARMA impulse-response entries below this fraction of the peak are zeroed.
pub const IMPULSE_CUTOFF: f64 = 1e-16;

const IMPULSE_HARD_LIMIT: usize = 10_000_000;

pub const SPEC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("AR polynomial is not causal: a root has modulus {modulus:.12} (must exceed 1 + {CAUSALITY_MARGIN:e})")]
    NonCausal { modulus: f64 },
    #[error("phi(1) = 0: the model has a unit root")]
    SingularModel,
    #[error("truncation M = {m} is shorter than max(p, q) = {min}")]
    TruncationTooShort { m: usize, min: usize },
    #[error("malformed process document: {0}")]
    Document(String),
}

/// Law of the i.i.d. innovations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationSpec {
    Gaussian {
        sigma2: f64,
    },
    /// Exponential with the given rate, shifted to mean zero.
    CenteredExponential {
        rate: f64,
    },
    /// Moments only; cannot be simulated.
    Custom {
        sigma2: f64,
        eta: f64,
        m4: f64,
        m6: f64,
    },
}

/// Central moments of a centered innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationMoments {
    pub sigma2: f64,
    pub eta: f64,
    pub m4: f64,
    pub m6: f64,
}

impl InnovationSpec {
    pub fn standard_gaussian() -> Self {
        Self::Gaussian { sigma2: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        let ok = match *self {
            Self::Gaussian { sigma2 } => sigma2.is_finite() && sigma2 > 0.0,
            Self::CenteredExponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Custom { sigma2, eta, m4, m6 } => {
                sigma2.is_finite() && sigma2 > 0.0 && eta.is_finite() && m4.is_finite() && m6.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ProcessError::InvalidParameter(format!("innovation {self}")))
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.moments().sigma2
    }

    pub fn eta(&self) -> f64 {
        self.moments().eta
    }

    /// Central moments `(σ², η, E ε⁴, E ε⁶)` of the centered law.
    pub fn moments(&self) -> InnovationMoments {
        match *self {
            Self::Gaussian { sigma2 } => InnovationMoments {
                sigma2,
                eta: 0.0,
                m4: 3.0 * sigma2 * sigma2,
                m6: 15.0 * sigma2 * sigma2 * sigma2,
            },
            // k-th central moment of Exp(λ) is !k / λ^k (subfactorial).
            Self::CenteredExponential { rate } => InnovationMoments {
                sigma2: 1.0 / rate.powi(2),
                eta: 2.0 / rate.powi(3),
                m4: 9.0 / rate.powi(4),
                m6: 265.0 / rate.powi(6),
            },
            Self::Custom { sigma2, eta, m4, m6 } => InnovationMoments { sigma2, eta, m4, m6 },
        }
    }
}

/// `gaussian`, `gaussian:<sigma2>`, `exp:<rate>`, `custom:<sigma2>,<eta>,<m4>,<m6>`.
impl FromStr for InnovationSpec {
    type Err = ProcessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProcessError::InvalidParameter(format!("cannot parse innovation law {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t)),
            None => (s.trim(), None),
        };
        let law = match (head, tail) {
            ("gaussian" | "normal", None) => Self::standard_gaussian(),
            ("gaussian" | "normal", Some(t)) => Self::Gaussian { sigma2: num(t)? },
            ("exp" | "exponential", None) => Self::CenteredExponential { rate: 1.0 },
            ("exp" | "exponential", Some(t)) => Self::CenteredExponential { rate: num(t)? },
            ("custom", Some(t)) => {
                let v = t.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
                match v[..] {
                    [sigma2, eta, m4, m6] => Self::Custom { sigma2, eta, m4, m6 },
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for InnovationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Gaussian { sigma2 } => write!(f, "gaussian:{sigma2}"),
            Self::CenteredExponential { rate } => write!(f, "exp:{rate}"),
            Self::Custom { sigma2, eta, m4, m6 } => write!(f, "custom:{sigma2},{eta},{m4},{m6}"),
        }
    }
}

/// FARIMA(p, d, q) model with its innovation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProcessSpec {
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
    #[serde(default)]
    pub d: f64,
    pub innovation: InnovationSpec,
}

impl LinearProcessSpec {
    pub fn white_noise(innovation: InnovationSpec) -> Self {
        Self::arma(Vec::new(), Vec::new(), innovation)
    }

    pub fn arma(ar: Vec<f64>, ma: Vec<f64>, innovation: InnovationSpec) -> Self {
        Self {
            mu: 0.0,
            ar,
            ma,
            d: 0.0,
            innovation,
        }
    }

    /// FARIMA(0, d, 0).
    pub fn fractional(d: f64, innovation: InnovationSpec) -> Self {
        Self {
            d,
            ..Self::white_noise(innovation)
        }
    }

    pub fn with_mean(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn is_long_memory(&self) -> bool {
        self.d > 0.0
    }

    /// `max(p, q)`, the minimum admissible truncation.
    pub fn min_truncation(&self) -> usize {
        self.ar.len().max(self.ma.len())
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        if !self.mu.is_finite() {
            return Err(ProcessError::InvalidParameter("mu must be finite".into()));
        }
        if !(self.d.is_finite() && (0.0..0.5).contains(&self.d)) {
            return Err(ProcessError::InvalidParameter(format!(
                "d = {} is outside [0, 0.5)",
                self.d
            )));
        }
        if self.ar.iter().chain(&self.ma).any(|c| !c.is_finite()) {
            return Err(ProcessError::InvalidParameter(
                "ARMA coefficients must be finite".into(),
            ));
        }
        self.innovation.validate()?;
        check_causal(&self.ar)
    }

    /// `φ(1) = 1 − Σ φ_k`.
    pub fn ar_at_one(&self) -> f64 {
        1.0 - self.ar.iter().sum::<f64>()
    }

    /// `θ(1) = 1 + Σ θ_k`.
    pub fn ma_at_one(&self) -> f64 {
        1.0 + self.ma.iter().sum::<f64>()
    }

    /// `c(d) = θ(1) / (φ(1) Γ(d))`, the constant in `a_i ~ c(d) i^{d−1}`.
    /// Zero for short memory.
    pub fn long_memory_constant(&self) -> Result<f64, ProcessError> {
        let phi1 = self.ar_at_one();
        if phi1 == 0.0 {
            return Err(ProcessError::SingularModel);
        }
        if self.d == 0.0 {
            return Ok(0.0);
        }
        Ok(self.ma_at_one() / (phi1 * gamma(self.d)))
    }

    /// Parses a process document. A `schema_version` key, when present,
    /// must equal [`SPEC_SCHEMA_VERSION`].
    pub fn from_json(text: &str) -> Result<Self, ProcessError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ProcessError::Document(e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(v) = obj.remove("schema_version") {
                if v.as_u64() != Some(SPEC_SCHEMA_VERSION as u64) {
                    return Err(ProcessError::Document(format!("unsupported schema_version {v}")));
                }
            }
        }
        let spec: Self = serde_json::from_value(value).map_err(|e| ProcessError::Document(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("spec serializes");
        value
            .as_object_mut()
            .expect("spec is an object")
            .insert("schema_version".into(), SPEC_SCHEMA_VERSION.into());
        serde_json::to_string_pretty(&value).expect("spec serializes")
    }
}

/// Rejects AR polynomials with a root in the closed unit disk, via the
/// eigenvalues of the companion matrix (reciprocal roots of `φ`).
fn check_causal(ar: &[f64]) -> Result<(), ProcessError> {
    let p = ar.len();
    if p == 0 {
        return Ok(());
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (k, &phi) in ar.iter().enumerate() {
        companion[(0, k)] = phi;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if radius == 0.0 {
        return Ok(());
    }
    let modulus = 1.0 / radius;
    if modulus > 1.0 + CAUSALITY_MARGIN {
        Ok(())
    } else {
        Err(ProcessError::NonCausal { modulus })
    }
}

/// Truncated MA(∞) weights `a₀ … a_M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaCoefficients<T> {
    a: Vec<T>,
    d: T,
    tail_estimate: T,
    #[serde(skip)]
    support: usize,
}

impl<T: Real> MaCoefficients<T> {
    /// Wraps an explicit finite weight sequence (a pure MA(M) model, so the
    /// tail is exactly zero).
    pub fn from_weights(a: Vec<T>) -> Self {
        assert!(!a.is_empty(), "at least a_0 is required");
        Self::with_metadata(a, T::zero(), T::zero())
    }

    pub fn with_metadata(a: Vec<T>, d: T, tail_estimate: T) -> Self {
        assert!(!a.is_empty(), "at least a_0 is required");
        let support = a.iter().rposition(|c| *c != T::zero()).map_or(0, |i| i + 1);
        Self {
            a,
            d,
            tail_estimate,
            support,
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.a
    }

    pub fn truncation_m(&self) -> usize {
        self.a.len() - 1
    }

    pub fn d(&self) -> T {
        self.d
    }

    /// Estimate of `Σ_{i>M} a_i²`.
    pub fn tail_estimate(&self) -> T {
        self.tail_estimate
    }

    /// One past the last nonzero weight.
    pub fn support(&self) -> usize {
        self.support
    }

    /// The weights up to the last nonzero one.
    pub fn nonzero_prefix(&self) -> &[T] {
        &self.a[..self.support]
    }

    pub fn sum_of_squares(&self) -> T {
        crate::summation::sum(self.a.iter().map(|&c| c * c))
    }
}

/// Binomial weights of `(1 − B)^{−d}`: `w₀ = 1`, `w_i = w_{i−1}(i − 1 + d)/i`.
pub fn fractional_weights<T: Real>(d: T, m: usize) -> Vec<T> {
    let mut w = Vec::with_capacity(m + 1);
    w.push(T::one());
    let mut prev = T::one();
    for i in 1..=m {
        let fi = T::from_count(i);
        prev = prev * (fi - T::one() + d) / fi;
        w.push(prev);
    }
    w
}

/// ARMA impulse response `ψ_j = θ_j + Σ φ_k ψ_{j−k}` for `j ≤ limit`,
/// stopped once the response is negligible (trailing zeros are dropped).
pub fn arma_impulse<T: Real>(ar: &[f64], ma: &[f64], limit: usize) -> Vec<T> {
    let ar: Vec<T> = ar.iter().map(|&c| T::lit(c)).collect();
    let p = ar.len();
    let q = ma.len();
    let order = p.max(q);
    let mut psi: Vec<T> = Vec::with_capacity(order + 64);
    let mut peak = T::zero();
    let cutoff = T::lit(IMPULSE_CUTOFF);
    let window = p.max(1);
    for j in 0..=limit {
        let mut v = match j {
            0 => T::one(),
            j if j <= q => T::lit(ma[j - 1]),
            _ => T::zero(),
        };
        for (k, &phi) in ar.iter().enumerate() {
            if j > k {
                v += phi * psi[j - k - 1];
            }
        }
        peak = peak.max(v.abs());
        psi.push(v);
        if j >= order && j + 1 >= window && psi[j + 1 - window..].iter().all(|c| c.abs() <= cutoff * peak) {
            break;
        }
    }
    for c in psi.iter_mut() {
        if c.abs() <= cutoff * peak {
            *c = T::zero();
        }
    }
    while psi.len() > 1 && *psi.last().unwrap() == T::zero() {
        psi.pop();
    }
    psi
}

/// Expands `spec` into `a₀ … a_M`.
pub fn expand_ma<T: Real>(spec: &LinearProcessSpec, m: usize) -> Result<MaCoefficients<T>, ProcessError> {
    spec.validate()?;
    let min = spec.min_truncation();
    if m < min {
        return Err(ProcessError::TruncationTooShort { m, min });
    }

    let d = T::lit(spec.d);
    let psi = arma_impulse::<T>(&spec.ar, &spec.ma, m);
    let a = if spec.d == 0.0 {
        let mut a = psi;
        a.resize(m + 1, T::zero());
        a
    } else {
        let w = fractional_weights(d, m);
        let mut a = vec![T::zero(); m + 1];
        for (j, &pj) in psi.iter().enumerate() {
            if pj == T::zero() {
                continue;
            }
            for (out, &wi) in a[j..].iter_mut().zip(&w) {
                *out += pj * wi;
            }
        }
        a
    };

    let tail = if spec.d == 0.0 {
        arma_tail_sum_of_squares(spec, m)
    } else {
        long_memory_tail_bound(spec, m)?
    };
    Ok(MaCoefficients::with_metadata(a, d, T::lit(tail)))
}

/// `Σ_{i>M} ψ_i²` for a short-memory model, by continuing the recursion.
fn arma_tail_sum_of_squares(spec: &LinearProcessSpec, m: usize) -> f64 {
    let psi = arma_impulse::<f64>(&spec.ar, &spec.ma, IMPULSE_HARD_LIMIT);
    crate::summation::sum(psi.iter().skip(m + 1).map(|c| c * c))
}

/// `c(d)² M^{2d−1} / (1 − 2d)`.
fn long_memory_tail_bound(spec: &LinearProcessSpec, m: usize) -> Result<f64, ProcessError> {
    let c = spec.long_memory_constant()?;
    let m = m.max(1) as f64;
    Ok(c * c * m.powf(2.0 * spec.d - 1.0) / (1.0 - 2.0 * spec.d))
}

/// `m(d)`: `Σ a_i = θ(1)/φ(1)` for short memory, `c(d)/d` for long memory.
pub fn coefficient_sum_m(spec: &LinearProcessSpec) -> Result<f64, ProcessError> {
    spec.validate()?;
    let phi1 = spec.ar_at_one();
    if phi1 == 0.0 {
        return Err(ProcessError::SingularModel);
    }
    if spec.d == 0.0 {
        Ok(spec.ma_at_one() / phi1)
    } else {
        Ok(spec.long_memory_constant()? / spec.d)
    }
}

/// Default truncation for simulation: `max(10 n, 10⁴)` under long memory,
/// the geometric tail certificate at relative tolerance `1e−14` otherwise.
pub fn default_truncation(spec: &LinearProcessSpec, n: usize) -> Result<usize, ProcessError> {
    if spec.is_long_memory() {
        spec.validate()?;
        Ok(long_memory_floor(n).max(spec.min_truncation()))
    } else {
        choose_truncation(spec, n, 1e-14)
    }
}

fn long_memory_floor(n: usize) -> usize {
    n.saturating_mul(10).max(10_000)
}

/// Truncation M with `Σ_{i>M} a_i² ≤ tol · Σ_{i≤M} a_i²`.
///
/// Short memory scans the exact impulse response. Long memory solves the
/// closed-form bound `c(d)² M^{2d−1}/(1−2d)` against the squared mass of
/// the first `10⁴` weights and never returns less than `max(10 n, 10⁴)`;
/// the result saturates at `usize::MAX` when the bound is unreachable.
pub fn choose_truncation(spec: &LinearProcessSpec, n: usize, tol: f64) -> Result<usize, ProcessError> {
    spec.validate()?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(ProcessError::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    let min = spec.min_truncation();
    if !spec.is_long_memory() {
        let psi = arma_impulse::<f64>(&spec.ar, &spec.ma, IMPULSE_HARD_LIMIT);
        let sq: Vec<f64> = psi.iter().map(|c| c * c).collect();
        let total = crate::summation::sum(sq.iter().copied());
        let mut head = crate::summation::CompensatedSum::new();
        for (i, &s) in sq.iter().enumerate() {
            head.add(s);
            let tail = (total - head.value()).max(0.0);
            if i >= min && tail <= tol * head.value() {
                return Ok(i);
            }
        }
        return Ok((sq.len() - 1).max(min));
    }

    let c = spec.long_memory_constant()?;
    let k = 10_000;
    let head: f64 = expand_ma::<f64>(spec, k.max(min))?.sum_of_squares();
    let d = spec.d;
    let m = (tol * head * (1.0 - 2.0 * d) / (c * c))
        .powf(1.0 / (2.0 * d - 1.0))
        .ceil();
    // `as` saturates for out-of-range floats.
    let m = m as usize;
    Ok(m.max(long_memory_floor(n)).max(min))
}
