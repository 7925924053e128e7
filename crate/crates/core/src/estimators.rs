//! Sample estimators: autocovariances, the Bartlett long-run variance, the
//! third-order sample covariances `Δ̄(h)`, `Δ̄(h, h′)`, the normalized
//! third-moment estimator `S̄₃(d)` and the scaled-skewness estimator
//! `k̂(d) = S̄₃ / v̂^{3/2}`.
//!
//! All functions take the raw series and subtract the sample mean; inner
//! sums use compensated summation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::summation::{sum, CompensatedSum};

pub const MIN_SERIES_FOR_SKEW: usize = 8;
pub const MIN_SERIES_FOR_GPH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("lag {lag} is out of range for a series of length {n}")]
    LagOutOfRange { lag: usize, n: usize },
    #[error("invalid bandwidth plan for n = {n}: {reason}")]
    Bandwidth { n: usize, reason: String },
    #[error("series of length {n} is too short (need at least {min})")]
    TooShort { n: usize, min: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate series: {0}")]
    Degenerate(String),
}

/// Bandwidths: `q0` for the long-run variance, `q1`–`q3` for the three
/// groups of terms in `S̄₃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthPlan {
    pub q0: usize,
    pub q1: usize,
    pub q2: usize,
    pub q3: usize,
}

impl BandwidthPlan {
    pub fn validate(&self, n: usize) -> Result<(), EstimatorError> {
        let fail = |reason: String| Err(EstimatorError::Bandwidth { n, reason });
        for (name, q) in [("q0", self.q0), ("q1", self.q1), ("q2", self.q2)] {
            if q < 1 || q >= n {
                return fail(format!("{name} = {q} must lie in [1, n)"));
            }
        }
        if self.q3 < 2 || self.q3 >= n {
            return fail(format!("q3 = {} must lie in [2, n)", self.q3));
        }
        Ok(())
    }

    /// Finite-sample stand-in for `q_i² = o(n)`, `q0 = o(n)`: `q_i² < n`
    /// and `q0 < n`.
    pub fn satisfies_growth(&self, n: usize) -> bool {
        [self.q1, self.q2, self.q3].iter().all(|&q| q * q < n) && self.q0 < n
    }
}

/// `⌈x⌉` that ignores floating-point fuzz just above an integer.
fn fuzzy_ceil(x: f64) -> usize {
    (x - 1e-9).ceil().max(1.0) as usize
}

/// Default bandwidth rule.
///
/// Long memory: `q1 = q2 = ⌈n^0.2⌉`, `q3 = max(2, ⌈n^0.1⌉)`,
/// `q0 = ⌈n^{0.5−d}⌉`. Short memory: all four equal `⌈n^0.33⌉`.
pub fn default_bandwidths(n: usize, d: f64) -> BandwidthPlan {
    let nf = n as f64;
    if d > 0.0 {
        let q12 = fuzzy_ceil(nf.powf(0.2));
        BandwidthPlan {
            q0: fuzzy_ceil(nf.powf(0.5 - d)),
            q1: q12,
            q2: q12,
            q3: fuzzy_ceil(nf.powf(0.1)).max(2),
        }
    } else {
        let q = fuzzy_ceil(nf.powf(0.33)).max(2);
        BandwidthPlan {
            q0: q,
            q1: q,
            q2: q,
            q3: q,
        }
    }
}

/// Deviations from the sample mean.
pub fn centered<T: Real>(x: &[T]) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let mean = sum(x.iter().copied()) / T::from_count(x.len());
    x.iter().map(|&v| v - mean).collect()
}

fn check_lag(lag: usize, n: usize) -> Result<(), EstimatorError> {
    if lag >= n {
        Err(EstimatorError::LagOutOfRange { lag, n })
    } else {
        Ok(())
    }
}

// Kernels on centered data.

fn autocov_c<T: Real>(y: &[T], h: usize) -> T {
    let n = y.len();
    sum(y[..n - h].iter().zip(&y[h..]).map(|(&a, &b)| a * b)) / T::from_count(n)
}

fn delta_c<T: Real>(y: &[T], h: usize) -> T {
    let n = y.len();
    let total = if h == 0 {
        sum(y.iter().map(|&v| v * v * v))
    } else {
        sum(y[..n - h].iter().zip(&y[h..]).map(|(&a, &b)| a * b * (a + b)))
    };
    total / T::from_count(n)
}

fn delta2_c<T: Real>(y: &[T], h: usize, hp: usize) -> T {
    let n = y.len();
    let span = h + hp;
    let total = sum(y[..n - span]
        .iter()
        .zip(&y[h..n - hp])
        .zip(&y[span..])
        .map(|((&a, &b), &c)| a * b * c));
    total / T::from_count(n)
}

fn long_run_variance_c<T: Real>(y: &[T], d: T, q0: usize) -> T {
    let qf = T::from_count(q0);
    let mut acc = CompensatedSum::new();
    acc.add(autocov_c(y, 0));
    for h in 1..q0 {
        let w = T::one() - T::from_count(h) / qf;
        acc.add(T::lit(2.0) * w * autocov_c(y, h));
    }
    qf.powf(-T::lit(2.0) * d) * acc.value()
}

fn s3_bar_c<T: Real>(y: &[T], d: T, plan: &BandwidthPlan) -> T {
    let three_d = T::lit(3.0) * d;
    let scale = |q: usize| T::from_count(q).powf(-three_d);

    let first = scale(plan.q1) * delta_c(y, 0);

    let q2 = T::from_count(plan.q2);
    let mut pairs = CompensatedSum::new();
    for h in 1..plan.q2 {
        pairs.add((T::one() - T::from_count(h) / q2) * delta_c(y, h));
    }

    let q3 = T::from_count(plan.q3);
    let mut triples = CompensatedSum::new();
    for h in 1..plan.q3 {
        for hp in 1..=(plan.q3 - h) {
            let w = T::one() - T::from_count(h + hp) / q3;
            if w != T::zero() {
                triples.add(w * delta2_c(y, h, hp));
            }
        }
    }

    first + T::lit(3.0) * scale(plan.q2) * pairs.value() + T::lit(6.0) * scale(plan.q3) * triples.value()
}

/// `γ̂(h) = n⁻¹ Σ_{j=1}^{n−h} (X_j − X̄)(X_{j+h} − X̄)`.
pub fn sample_autocov<T: Real>(x: &[T], h: usize) -> Result<T, EstimatorError> {
    check_lag(h, x.len())?;
    Ok(autocov_c(&centered(x), h))
}

/// `q0^{−2d} (γ̂(0) + 2 Σ_{h=1}^{q0} (1 − h/q0) γ̂(h))`. May be nonpositive
/// on pathological samples; [`k_hat`] flags that case.
pub fn long_run_variance<T: Real>(x: &[T], d: T, q0: usize) -> Result<T, EstimatorError> {
    if q0 < 1 {
        return Err(EstimatorError::Bandwidth {
            n: x.len(),
            reason: "q0 must be at least 1".into(),
        });
    }
    check_lag(q0, x.len())?;
    Ok(long_run_variance_c(&centered(x), d, q0))
}

/// `Δ̄(h) = n⁻¹ Σ_{j=1}^{n−h} ((X_j−X̄)²(X_{j+h}−X̄) + (X_j−X̄)(X_{j+h}−X̄)²)`
/// for `h ≥ 1`; `Δ̄(0) = n⁻¹ Σ (X_j − X̄)³`.
pub fn delta_bar<T: Real>(x: &[T], h: usize) -> Result<T, EstimatorError> {
    check_lag(h, x.len())?;
    Ok(delta_c(&centered(x), h))
}

/// `Δ̄(h, h′) = n⁻¹ Σ_{j=1}^{n−h−h′} (X_j−X̄)(X_{j+h}−X̄)(X_{j+h+h′}−X̄)`.
pub fn delta_bar2<T: Real>(x: &[T], h: usize, h_prime: usize) -> Result<T, EstimatorError> {
    if h == 0 || h_prime == 0 {
        return Err(EstimatorError::Argument(format!(
            "Δ̄(h, h') needs h ≥ 1 and h' ≥ 1, got ({h}, {h_prime})"
        )));
    }
    check_lag(h + h_prime, x.len())?;
    Ok(delta2_c(&centered(x), h, h_prime))
}

/// `S̄₃(d) = q1^{−3d} Δ̄(0) + 3 q2^{−3d} Σ_{h=1}^{q2} (1 − h/q2) Δ̄(h)
///        + 6 q3^{−3d} Σ_{h=1}^{q3−1} Σ_{h′=1}^{q3−h} (1 − (h+h′)/q3) Δ̄(h, h′)`.
pub fn s3_bar<T: Real>(x: &[T], d: T, plan: &BandwidthPlan) -> Result<T, EstimatorError> {
    plan.validate(x.len())?;
    Ok(s3_bar_c(&centered(x), d, plan))
}

/// Output of [`k_hat`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewEstimate<T> {
    pub s3_bar: T,
    pub v_hat: T,
    /// `S̄₃ / v̂^{3/2}`; `None` when `v̂ ≤ 0`.
    pub k_hat: Option<T>,
    pub d_used: T,
    pub bandwidths: BandwidthPlan,
    pub n: usize,
    pub flagged: bool,
}

/// `k̂(d) = S̄₃(d) / v̂^{3/2}`.
pub fn k_hat<T: Real>(x: &[T], d: T, plan: &BandwidthPlan) -> Result<SkewEstimate<T>, EstimatorError> {
    let n = x.len();
    if n < MIN_SERIES_FOR_SKEW {
        return Err(EstimatorError::TooShort {
            n,
            min: MIN_SERIES_FOR_SKEW,
        });
    }
    plan.validate(n)?;
    let y = centered(x);
    let s3 = s3_bar_c(&y, d, plan);
    let v = long_run_variance_c(&y, d, plan.q0);
    let ok = v > T::zero() && v.is_finite() && s3.is_finite();
    Ok(SkewEstimate {
        s3_bar: s3,
        v_hat: v,
        k_hat: ok.then(|| s3 / v.powf(T::lit(1.5))),
        d_used: d,
        bandwidths: *plan,
        n,
        flagged: !ok,
    })
}

/// Log-periodogram (GPH) regression estimate of `d` over the first
/// `⌈n^bandwidth_frac⌉` Fourier frequencies, clamped to `[0, 0.499]`.
pub fn estimate_d_gph<T: Real>(x: &[T], bandwidth_frac: f64) -> Result<f64, EstimatorError> {
    let n = x.len();
    if n < MIN_SERIES_FOR_GPH {
        return Err(EstimatorError::TooShort {
            n,
            min: MIN_SERIES_FOR_GPH,
        });
    }
    if !(bandwidth_frac > 0.0 && bandwidth_frac <= 0.8) {
        return Err(EstimatorError::Argument(format!(
            "bandwidth_frac = {bandwidth_frac} must lie in (0, 0.8]"
        )));
    }
    let y: Vec<f64> = centered(x).into_iter().map(Real::to_f64_lossy).collect();
    if y.iter().all(|v| *v == 0.0) {
        return Err(EstimatorError::Degenerate("zero sample variance".into()));
    }

    let mut buf: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let m = fuzzy_ceil((n as f64).powf(bandwidth_frac)).clamp(3, (n - 1) / 2);
    let mut regressors = Vec::with_capacity(m);
    let mut responses = Vec::with_capacity(m);
    for (j, c) in buf.iter().enumerate().skip(1).take(m) {
        let omega = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let periodogram = c.norm_sqr() / (2.0 * std::f64::consts::PI * n as f64);
        if periodogram.is_nan() || periodogram <= 0.0 {
            return Err(EstimatorError::Degenerate(format!(
                "zero periodogram ordinate at j = {j}"
            )));
        }
        regressors.push(-2.0 * (2.0 * (omega / 2.0).sin()).abs().ln());
        responses.push(periodogram.ln());
    }
    let mf = m as f64;
    let rbar = sum(regressors.iter().copied()) / mf;
    let lbar = sum(responses.iter().copied()) / mf;
    let sxy = sum(regressors.iter().zip(&responses).map(|(r, l)| (r - rbar) * (l - lbar)));
    let sxx = sum(regressors.iter().map(|r| (r - rbar) * (r - rbar)));
    Ok((sxy / sxx).clamp(0.0, 0.499))
}
