//! Closed-form and limiting quantities for partial sums `S_n = X₁ + … + X_n`
//! of a linear process, plus exact finite-`n` second and third moments used
//! as an oracle for the estimators.
//!
//! The integrals `I_p(d) = ∫₀^∞ ((1+x)^d − x^d)^p dx` are evaluated by
//! adaptive Gauss–Kronrod quadrature on `[0, 1]`, the substitution
//! `x = 1/t` on `[1, B]`, and a convergent series in `1/x` beyond `B`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::{coefficient_sum_m, InnovationSpec, LinearProcessSpec, MaCoefficients, ProcessError};
use crate::quadrature::{integrate, QuadratureError, Tolerance};
use crate::scalar::Real;
use crate::summation::{sum, CompensatedSum};

/// Where the quadrature hands over to the asymptotic series.
const SERIES_START: f64 = 16.0;
const SERIES_TERMS: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("d = {0} is outside [0, 0.5)")]
    Domain(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

fn check_d<T: Real>(d: T) -> Result<(), AnalyticError> {
    if d.is_finite() && d >= T::zero() && d < T::lit(0.5) {
        Ok(())
    } else {
        Err(AnalyticError::Domain(d.to_f64_lossy()))
    }
}

/// `((1+x)^d − x^d)^p`, evaluated without cancellation for large `x`.
#[inline]
fn increment_power<T: Real>(x: T, d: T, p: i32) -> T {
    let inc = if x == T::zero() {
        T::one()
    } else {
        x.powf(d) * (d * x.recip().ln_1p()).exp_m1()
    };
    inc.powi(p)
}

/// `∫_B^∞ ((1+x)^d − x^d)^p dx` for `B ≥ 16`, from
/// `(1+x)^d − x^d = x^d Σ_{k≥1} C(d,k) x^{−k}` integrated term by term.
fn series_remainder<T: Real>(p: usize, d: T, b: T) -> T {
    // c[k] = C(d, k + 1)
    let mut c = Vec::with_capacity(SERIES_TERMS);
    let mut binom = T::one();
    for k in 1..=SERIES_TERMS {
        binom = binom * (d - T::from_count(k - 1)) / T::from_count(k);
        c.push(binom);
    }
    // e = c^p, truncated to SERIES_TERMS coefficients.
    let mut e = vec![T::zero(); SERIES_TERMS];
    e[0] = T::one();
    for _ in 0..p {
        let mut next = vec![T::zero(); SERIES_TERMS];
        for (i, &ei) in e.iter().enumerate() {
            if ei == T::zero() {
                continue;
            }
            for (j, &cj) in c.iter().enumerate().take(SERIES_TERMS - i) {
                next[i + j] += ei * cj;
            }
        }
        e = next;
    }
    // g(x) = Σ_j e_j x^{pd − p − j}
    let pf = T::from_count(p);
    let mut acc = CompensatedSum::new();
    for (j, &ej) in e.iter().enumerate() {
        let expo = pf * d - pf - T::from_count(j) + T::one();
        acc.add(ej * b.powf(expo) / (-expo));
    }
    acc.value()
}

/// `∫_L^∞ ((1+x)^d − x^d)^p dx` for integer `p ≥ 2` and `L ≥ 0`.
pub fn tail_integral_from<T: Real>(p: usize, d: T, lower: T) -> Result<T, AnalyticError> {
    check_d(d)?;
    if p < 2 {
        return Err(AnalyticError::Argument(format!("power p = {p} must be at least 2")));
    }
    if !(lower.is_finite() && lower >= T::zero()) {
        return Err(AnalyticError::Argument(format!(
            "lower limit {lower} must be finite and nonnegative"
        )));
    }
    if d == T::zero() {
        return Ok(T::zero());
    }
    let pi = p as i32;
    let tol = Tolerance::new(T::lit(1e-14), T::lit(1e-13));
    let one = T::one();
    let series_start = T::lit(SERIES_START).max(lower);

    let mut total = CompensatedSum::new();
    if lower < one {
        total.add(integrate(|x| increment_power(x, d, pi), lower, one, tol)?.value);
    }
    let mid_lo = lower.max(one);
    if mid_lo < series_start {
        // x = 1/t
        let q = integrate(
            |t: T| increment_power(t.recip(), d, pi) / (t * t),
            series_start.recip(),
            mid_lo.recip(),
            tol,
        )?;
        total.add(q.value);
    }
    total.add(series_remainder(p, d, series_start));
    Ok(total.value())
}

/// `I_p(d) = ∫₀^∞ ((1+x)^d − x^d)^p dx`.
pub fn tail_integral<T: Real>(p: usize, d: T) -> Result<T, AnalyticError> {
    tail_integral_from(p, d, T::zero())
}

/// `1/(1+2d) + I₂(d)`.
pub fn variance_shape<T: Real>(d: T) -> Result<T, AnalyticError> {
    Ok((T::one() + T::lit(2.0) * d).recip() + tail_integral(2, d)?)
}

/// `1/(1+3d) + I₃(d)`.
pub fn third_moment_shape<T: Real>(d: T) -> Result<T, AnalyticError> {
    Ok((T::one() + T::lit(3.0) * d).recip() + tail_integral(3, d)?)
}

/// Limit `k(d)` of `√n · E S_n³ / (Var S_n)^{3/2}`.
pub fn k_of_d<T: Real>(d: T, eta: T, sigma2: T) -> Result<T, AnalyticError> {
    check_d(d)?;
    if sigma2.is_nan() || sigma2 <= T::zero() {
        return Err(AnalyticError::Argument(format!("sigma2 = {sigma2} must be positive")));
    }
    let skew = eta / sigma2.powf(T::lit(1.5));
    if d == T::zero() {
        return Ok(skew);
    }
    Ok(skew * third_moment_shape(d)? / variance_shape(d)?.powf(T::lit(1.5)))
}

/// Limit constants for a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants<T> {
    pub d: T,
    pub sigma2: T,
    pub eta: T,
    /// `m(d)`
    pub m: T,
    pub i2: T,
    pub i3: T,
    /// Limiting scaled skewness `k(d)`.
    pub k: T,
    /// Limiting variance `v(d) = σ² m(d)² (1/(1+2d) + I₂)`.
    pub v: T,
    /// Limit of `n^{−1−3d} E S_n³`: `η m(d)³ (1/(1+3d) + I₃)`.
    pub s3: T,
}

impl<T: Real> AnalyticConstants<T> {
    pub fn new(d: T, m: T, sigma2: T, eta: T) -> Result<Self, AnalyticError> {
        check_d(d)?;
        let i2 = tail_integral(2, d)?;
        let i3 = tail_integral(3, d)?;
        let var_shape = (T::one() + T::lit(2.0) * d).recip() + i2;
        let third_shape = (T::one() + T::lit(3.0) * d).recip() + i3;
        Ok(Self {
            d,
            sigma2,
            eta,
            m,
            i2,
            i3,
            k: k_of_d(d, eta, sigma2)?,
            v: sigma2 * m * m * var_shape,
            s3: eta * m.powi(3) * third_shape,
        })
    }

    pub fn for_spec(spec: &LinearProcessSpec) -> Result<Self, AnalyticError> {
        let m = coefficient_sum_m(spec)?;
        let mo = spec.innovation.moments();
        Self::new(T::lit(spec.d), T::lit(m), T::lit(mo.sigma2), T::lit(mo.eta))
    }
}

/// Limit of a scaled moment of `S_n`: `E S_n^k ~ limit · n^{scaling_exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentLimit<T> {
    pub limit: T,
    pub scaling_exponent: T,
}

fn double_factorial_pairs(p: u32) -> f64 {
    // (2p)! / (2^p p!) = (2p − 1)!!
    (1..=p).map(|i| (2 * i - 1) as f64).product()
}

/// Leading-order behavior of `E S_n^k`.
///
/// Even `k = 2p`: `m^k σ^k (k!/(2^p p!)) V^p` with exponent `p(1+2d)`.
/// Odd `k = 3 + 2ℓ`: `m^k η σ^{k−3} C(k,3) ((2ℓ)!/(2^ℓ ℓ!)) W V^ℓ` with
/// exponent `k(1+2d)/2 − 1/2`, where `V = 1/(1+2d) + I₂`, `W = 1/(1+3d) + I₃`.
pub fn moment_limit<T: Real>(k: u32, d: T, eta: T, sigma2: T, m: T) -> Result<MomentLimit<T>, AnalyticError> {
    check_d(d)?;
    if k < 2 {
        return Err(AnalyticError::Argument(format!(
            "moment order k = {k} must be at least 2"
        )));
    }
    let v = variance_shape(d)?;
    let sigma = sigma2.sqrt();
    let kf = T::from(k).unwrap();
    let one_plus_2d = T::one() + T::lit(2.0) * d;
    if k.is_multiple_of(2) {
        let p = k / 2;
        Ok(MomentLimit {
            limit: m.powi(k as i32) * sigma.powi(k as i32) * T::lit(double_factorial_pairs(p)) * v.powi(p as i32),
            scaling_exponent: T::from(p).unwrap() * one_plus_2d,
        })
    } else {
        let l = (k - 3) / 2;
        let choose3 = (k * (k - 1) * (k - 2) / 6) as f64;
        let w = third_moment_shape(d)?;
        Ok(MomentLimit {
            limit: m.powi(k as i32)
                * eta
                * sigma.powi(k as i32 - 3)
                * T::lit(choose3 * double_factorial_pairs(l))
                * w
                * v.powi(l as i32),
            scaling_exponent: kf * one_plus_2d / T::lit(2.0) - T::lit(0.5),
        })
    }
}

/// `E S_n²` and `E S_n³` (the process is centered, so these are the
/// variance and third cumulant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments<T> {
    pub es2: T,
    pub es3: T,
}

impl<T: Real> ExactMoments<T> {
    /// `√n · E S_n³ / (E S_n²)^{3/2}`.
    pub fn scaled_skewness(&self, n: usize) -> T {
        T::from_count(n).sqrt() * self.es3 / self.es2.powf(T::lit(1.5))
    }

    /// `n^{−1−3d} E S_n³`, the normalized third moment targeted by `S̄₃`.
    pub fn normalized_third(&self, n: usize, d: T) -> T {
        self.es3 / T::from_count(n).powf(T::one() + T::lit(3.0) * d)
    }
}

fn cumulative<T: Real>(a: &[T]) -> Vec<T> {
    let mut acc = CompensatedSum::new();
    a.iter()
        .map(|&v| {
            acc.add(v);
            acc.value()
        })
        .collect()
}

struct MomentAccumulator<T> {
    sq: CompensatedSum<T>,
    cube: CompensatedSum<T>,
}

impl<T: Real> MomentAccumulator<T> {
    fn new() -> Self {
        Self {
            sq: CompensatedSum::new(),
            cube: CompensatedSum::new(),
        }
    }

    #[inline]
    fn add(&mut self, b: T) {
        let b2 = b * b;
        self.sq.add(b2);
        self.cube.add(b2 * b);
    }

    fn finish(self, innov: &InnovationSpec) -> ExactMoments<T> {
        ExactMoments {
            es2: T::lit(innov.sigma2()) * self.sq.value(),
            es3: T::lit(innov.eta()) * self.cube.value(),
        }
    }
}

/// Exact `E S_n²` and `E S_n³` for the finite MA(M) process with weights
/// `coeffs`: writing `S_n = Σ_j b_j ε_j` with window sums
/// `b_j = Σ_{t=max(j,1)}^{n} a_{t−j}`, `E S_n² = σ² Σ b_j²` and
/// `E S_n³ = η Σ b_j³`, summed over `1 − M ≤ j ≤ n`.
pub fn exact_moments_oracle<T: Real>(coeffs: &MaCoefficients<T>, n: usize, innov: &InnovationSpec) -> ExactMoments<T> {
    let a = coeffs.as_slice();
    let m = coeffs.truncation_m();
    let c = cumulative(a);
    let mut acc = MomentAccumulator::new();
    for j in 1..=n {
        acc.add(c[(n - j).min(m)]);
    }
    // j = 1 − u covers a_{u} … a_{u+n−1}.
    for u in 1..=m {
        acc.add(c[(u + n - 1).min(m)] - c[u - 1]);
    }
    acc.finish(innov)
}

/// [`exact_moments_oracle`] for the untruncated long-memory process: weights
/// beyond `M` continue as `ĉ i^{d−1}` with `ĉ = a_M M^{1−d}`, and the
/// contribution of innovations older than `1 − M` is integrated in closed
/// form through [`tail_integral_from`]. Identical to the truncated oracle
/// when `d = 0`.
pub fn exact_moments_with_tail<T: Real>(
    coeffs: &MaCoefficients<T>,
    n: usize,
    innov: &InnovationSpec,
) -> Result<ExactMoments<T>, AnalyticError> {
    let d = coeffs.d();
    check_d(d)?;
    let a = coeffs.as_slice();
    let m = coeffs.truncation_m();
    if d == T::zero() || m == 0 || a[m] == T::zero() {
        return Ok(exact_moments_oracle(coeffs, n, innov));
    }
    let c = cumulative(a);
    let half = T::lit(0.5);
    let mf = T::from_count(m);
    let c_hat = a[m] * mf.powf(T::one() - d);
    let scale = c_hat / d;
    let anchor = (mf + half).powf(d);
    let extended = |k: usize| -> T {
        if k <= m {
            c[k]
        } else {
            c[m] + scale * ((T::from_count(k) + half).powf(d) - anchor)
        }
    };

    let mut acc = MomentAccumulator::new();
    for j in 1..=n {
        acc.add(extended(n - j));
    }
    for u in 1..=m {
        acc.add(extended(u + n - 1) - c[u - 1]);
    }
    let mut moments = acc.finish(innov);

    // u > M: Σ (ĉ/d)^p ((u+n−½)^d − (u−½)^d)^p ≈ (ĉ/d)^p n^{1+pd} ∫_{M/n}^∞ ((1+y)^d − y^d)^p dy
    let nf = T::from_count(n);
    let lower = mf / nf;
    let rem2 = scale.powi(2) * nf.powf(T::one() + T::lit(2.0) * d) * tail_integral_from(2, d, lower)?;
    let rem3 = scale.powi(3) * nf.powf(T::one() + T::lit(3.0) * d) * tail_integral_from(3, d, lower)?;
    moments.es2 += T::lit(innov.sigma2()) * rem2;
    moments.es3 += T::lit(innov.eta()) * rem3;
    Ok(moments)
}

/// Third-order covariances of the process:
/// `Δ(0) = E X₁³ = η Σ a_i³`,
/// `Δ(h) = E X₁X²_{1+h} + E X₁²X_{1+h} = η(Σ a_i² a_{i+h} + Σ a_i a²_{i+h})` for `h ≥ 1`,
/// `Δ(h, h′) = E X₁X_{1+h}X_{1+h+h′} = η Σ a_i a_{i+h} a_{i+h+h′}`.
pub fn delta_theoretical<T: Real>(
    coeffs: &MaCoefficients<T>,
    h: usize,
    h_prime: Option<usize>,
    innov: &InnovationSpec,
) -> Result<T, AnalyticError> {
    let a = coeffs.nonzero_prefix();
    let eta = T::lit(innov.eta());
    let s = a.len();
    let value = match h_prime {
        Some(0) => return Err(AnalyticError::Argument("h' must be at least 1".into())),
        Some(hp) => {
            let span = h + hp;
            if span >= s {
                T::zero()
            } else {
                sum((0..s - span).map(|i| a[i] * a[i + h] * a[i + span]))
            }
        }
        None if h == 0 => sum(a.iter().map(|&v| v * v * v)),
        None => {
            if h >= s {
                T::zero()
            } else {
                sum((0..s - h).map(|i| a[i] * a[i + h] * (a[i] + a[i + h])))
            }
        }
    };
    Ok(eta * value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{expand_ma, fractional_weights};
    use approx::assert_relative_eq;

    fn exp1() -> InnovationSpec {
        InnovationSpec::CenteredExponential { rate: 1.0 }
    }

    // Reference values from an independent QUADPACK (scipy.integrate.quad)
    // evaluation of ((1+x)^d − x^d)^p over [0, 1] and [1, ∞).
    const I2_02: f64 = 0.124_607_257_586_213_66;
    const I3_02: f64 = 0.027_979_052_442_888_924;
    const I2_04: f64 = 0.964_018_980_637_196_8;
    const I3_04: f64 = 0.177_558_666_046_196_86;

    #[test]
    fn integrals_vanish_at_zero() {
        assert_eq!(tail_integral::<f64>(2, 0.0).unwrap(), 0.0);
        assert_eq!(tail_integral::<f64>(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn integrals_match_reference_values() {
        assert_relative_eq!(tail_integral(2, 0.2).unwrap(), I2_02, epsilon = 1e-11);
        assert_relative_eq!(tail_integral(3, 0.2).unwrap(), I3_02, epsilon = 1e-11);
        assert_relative_eq!(tail_integral(2, 0.4).unwrap(), I2_04, epsilon = 1e-10);
        assert_relative_eq!(tail_integral(3, 0.4).unwrap(), I3_04, epsilon = 1e-11);
    }

    #[test]
    fn integral_splits_are_additive() {
        for d in [0.05, 0.25, 0.45] {
            for p in [2, 3, 4] {
                let whole = tail_integral_from::<f64>(p, d, 0.0).unwrap();
                let parts = tail_integral_from(p, d, 3.7).unwrap()
                    + integrate(
                        |x: f64| increment_power(x, d, p as i32),
                        0.0,
                        3.7,
                        Tolerance::new(1e-15, 1e-14),
                    )
                    .unwrap()
                    .value;
                assert!((whole - parts).abs() < 1e-11, "p={p} d={d}");
                assert!(tail_integral_from(p, d, 1e6).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn series_remainder_matches_leading_term_far_out() {
        // ∫_B^∞ d^p x^{p(d−1)} dx dominates for huge B.
        let (d, b) = (0.3f64, 1e8f64);
        let lead = d.powi(2) * b.powf(2.0 * (d - 1.0) + 1.0) / (1.0 - 2.0 * (d - 1.0) - 2.0);
        let r = series_remainder(2, d, b);
        assert_relative_eq!(r, lead, max_relative = 1e-7);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(tail_integral::<f64>(2, 0.5), Err(AnalyticError::Domain(_))));
        assert!(matches!(tail_integral::<f64>(2, -0.1), Err(AnalyticError::Domain(_))));
        assert!(tail_integral::<f64>(1, 0.2).is_err());
        assert!(k_of_d(0.2, 2.0, 0.0).is_err());
        assert!(moment_limit(1, 0.2, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn k_at_zero_is_innovation_skewness() {
        assert_eq!(k_of_d(0.0, 2.0, 1.0).unwrap(), 2.0);
        assert_relative_eq!(k_of_d(0.0, 0.25, 0.25).unwrap(), 2.0);
        assert_eq!(k_of_d(0.3, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn k_values_for_exponential_innovations() {
        let k2: f64 = k_of_d(0.2, 2.0, 1.0).unwrap();
        let k4: f64 = k_of_d(0.4, 2.0, 1.0).unwrap();
        assert!((k2 - 1.7).abs() <= 0.05, "{k2}");
        assert!((k4 - 0.675).abs() <= 0.01, "{k4}");
        let expect =
            |i2: f64, i3: f64, d: f64| 2.0 * (1.0 / (1.0 + 3.0 * d) + i3) / (1.0 / (1.0 + 2.0 * d) + i2).powf(1.5);
        assert_relative_eq!(k2, expect(I2_02, I3_02, 0.2), epsilon = 1e-10);
        assert_relative_eq!(k4, expect(I2_04, I3_04, 0.4), epsilon = 1e-10);
    }

    #[test]
    fn k_decreases_in_d_and_keeps_sign() {
        let grid: Vec<f64> = (0..10).map(|i| i as f64 * 0.049).collect();
        let ks: Vec<f64> = grid.iter().map(|&d| k_of_d(d, -1.5, 2.0).unwrap()).collect();
        assert!(ks.iter().all(|k| *k < 0.0));
        assert!(ks.windows(2).all(|w| w[1].abs() <= w[0].abs()));
    }

    #[test]
    fn k_in_single_precision() {
        let k: f32 = k_of_d(0.2, 2.0, 1.0).unwrap();
        assert!((k - 1.699_688_8).abs() < 1e-4);
    }

    #[test]
    fn constants_for_specs() {
        let c = AnalyticConstants::<f64>::for_spec(&LinearProcessSpec::arma(vec![0.5], vec![0.5], exp1())).unwrap();
        assert_eq!((c.i2, c.i3, c.k, c.m), (0.0, 0.0, 2.0, 3.0));
        assert_relative_eq!(c.v, 9.0);
        let c = AnalyticConstants::<f64>::for_spec(&LinearProcessSpec::fractional(0.2, exp1())).unwrap();
        let m = 1.0 / statrs::function::gamma::gamma(1.2);
        assert_relative_eq!(c.m, m, max_relative = 1e-14);
        assert_relative_eq!(c.v, m * m * (1.0 / 1.4 + I2_02), max_relative = 1e-10);
        assert_relative_eq!(c.s3, 2.0 * m.powi(3) * (1.0 / 1.6 + I3_02), max_relative = 1e-10);
    }

    #[test]
    fn moment_limits_iid() {
        let l2 = moment_limit(2, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!((l2.limit, l2.scaling_exponent), (1.0, 1.0));
        let l3 = moment_limit(3, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!((l3.limit, l3.scaling_exponent), (2.0, 1.0));
        // k = 4: 3 σ⁴ n²; k = 5: 10 η σ² n^{2}.
        let l4 = moment_limit(4, 0.0, 2.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(l4.limit, 12.0, max_relative = 1e-14);
        assert_eq!(l4.scaling_exponent, 2.0);
        let l5 = moment_limit(5, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!((l5.limit, l5.scaling_exponent), (20.0, 2.0));
        let l6 = moment_limit(6, 0.1, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(l6.scaling_exponent, 3.6, max_relative = 1e-15);
    }

    #[test]
    fn normalized_even_moments_are_gaussian() {
        // E[(S_n/√Var S_n)^{2p}] → (2p)!/(2^p p!).
        for d in [0.0, 0.2, 0.4] {
            let m = 1.3;
            let l2 = moment_limit::<f64>(2, d, 2.0, 1.5, m).unwrap();
            for (p, target) in [(2u32, 3.0), (3, 15.0)] {
                let lk = moment_limit(2 * p, d, 2.0, 1.5, m).unwrap();
                assert_relative_eq!(lk.limit / l2.limit.powi(p as i32), target, max_relative = 1e-12);
                assert_relative_eq!(
                    lk.scaling_exponent,
                    p as f64 * l2.scaling_exponent,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn skewness_from_moment_limits_is_k() {
        for d in [0.0, 0.15, 0.35] {
            let l2 = moment_limit::<f64>(2, d, 2.0, 1.0, 0.8).unwrap();
            let l3 = moment_limit(3, d, 2.0, 1.0, 0.8).unwrap();
            assert_relative_eq!(
                l3.limit / l2.limit.powf(1.5),
                k_of_d(d, 2.0, 1.0).unwrap(),
                max_relative = 1e-12
            );
            // √n · n^{e3} / n^{1.5 e2} = n^0
            assert_relative_eq!(
                0.5 + l3.scaling_exponent - 1.5 * l2.scaling_exponent,
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn oracle_iid() {
        let c = MaCoefficients::from_weights(vec![1.0]);
        let m = exact_moments_oracle(&c, 37, &exp1());
        assert_eq!((m.es2, m.es3), (37.0, 74.0));
        assert_eq!(m.scaled_skewness(37), 2.0);
    }

    #[test]
    fn oracle_ma1_pair() {
        let a1 = 0.7;
        let c = MaCoefficients::from_weights(vec![1.0, a1]);
        let m = exact_moments_oracle(&c, 2, &exp1());
        assert_relative_eq!(
            m.es3,
            2.0 * (1.0 + (1.0f64 + a1).powi(3) + a1.powi(3)),
            max_relative = 1e-15
        );
    }

    #[test]
    fn oracle_matches_brute_force_enumeration() {
        // E S_n³ = η Σ_j (Σ_t a_{t−j})³ enumerated from scratch.
        let a = vec![1.0, -0.4, 0.3, 0.25, 0.1];
        let n = 6usize;
        let c = MaCoefficients::from_weights(a.clone());
        let m = a.len() - 1;
        let (mut s2, mut s3) = (0.0, 0.0);
        for j in (1 - m as i64)..=(n as i64) {
            let b: f64 = (1..=n as i64)
                .filter_map(|t| usize::try_from(t - j).ok().and_then(|i| a.get(i)))
                .sum();
            s2 += b * b;
            s3 += b * b * b;
        }
        let innov = InnovationSpec::Custom {
            sigma2: 1.7,
            eta: -0.6,
            m4: 1.0,
            m6: 1.0,
        };
        let o = exact_moments_oracle(&c, n, &innov);
        assert_relative_eq!(o.es2, 1.7 * s2, max_relative = 1e-14);
        assert_relative_eq!(o.es3, -0.6 * s3, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_innovations_have_no_third_moment() {
        let c = expand_ma::<f64>(
            &LinearProcessSpec::fractional(0.3, InnovationSpec::standard_gaussian()),
            3000,
        )
        .unwrap();
        let o = exact_moments_oracle(&c, 500, &InnovationSpec::standard_gaussian());
        assert_eq!(o.es3, 0.0);
        assert_eq!(k_of_d(0.3, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn deltas_small_cases() {
        let white = MaCoefficients::from_weights(vec![1.0]);
        assert_eq!(delta_theoretical(&white, 1, None, &exp1()).unwrap(), 0.0);
        assert_eq!(delta_theoretical(&white, 0, None, &exp1()).unwrap(), 2.0);
        let ma1 = MaCoefficients::from_weights(vec![1.0, 0.5]);
        assert_eq!(delta_theoretical(&ma1, 1, None, &exp1()).unwrap(), 1.5);
        assert_eq!(delta_theoretical(&ma1, 1, Some(1), &exp1()).unwrap(), 0.0);
        assert!(delta_theoretical(&ma1, 1, Some(0), &exp1()).is_err());
        let ma2 = MaCoefficients::from_weights(vec![1.0, 0.5, 0.25]);
        assert_eq!(delta_theoretical(&ma2, 1, Some(1), &exp1()).unwrap(), 2.0 * 0.125);
    }

    #[test]
    fn oracle_agrees_with_delta_decomposition() {
        let spec = LinearProcessSpec::arma(vec![0.5], vec![0.5], exp1());
        let c = expand_ma::<f64>(&spec, 2000).unwrap();
        let n = 50;
        let o = exact_moments_oracle(&c, n, &exp1());
        let dec = decomposition(&c, n);
        assert!((o.es3 - dec).abs() <= 1e-10 * dec.abs(), "{} vs {dec}", o.es3);
    }

    // n (Δ(0) + 3 Σ_h (1 − h/n) Δ(h) + 6 Σ_{h,h'} (1 − (h+h')/n) Δ(h, h')).
    fn decomposition(c: &MaCoefficients<f64>, n: usize) -> f64 {
        let innov = exp1();
        let nf = n as f64;
        let mut total = delta_theoretical(c, 0, None, &innov).unwrap();
        for h in 1..n {
            total += 3.0 * (1.0 - h as f64 / nf) * delta_theoretical(c, h, None, &innov).unwrap();
            for hp in 1..(n - h) {
                total += 6.0 * (1.0 - (h + hp) as f64 / nf) * delta_theoretical(c, h, Some(hp), &innov).unwrap();
            }
        }
        nf * total
    }

    #[test]
    fn tail_continuation_closes_truncation_gap() {
        let d = 0.3;
        let n = 1024;
        let spec = LinearProcessSpec::fractional(d, exp1());
        let small = expand_ma::<f64>(&spec, 10 * n).unwrap();
        let with_tail = exact_moments_with_tail(&small, n, &exp1()).unwrap();
        // Reference: the truncated oracle at a 64x longer truncation plus the
        // leading-order estimate of what remains beyond it.
        let m_big = 640 * n;
        let big = MaCoefficients::with_metadata(fractional_weights(d, m_big), d, 0.0);
        let truncated_big = exact_moments_oracle(&big, n, &exp1());
        let truncated_small = exact_moments_oracle(&small, n, &exp1());
        assert!(truncated_small.es2 < truncated_big.es2);
        assert!(truncated_big.es2 < with_tail.es2);
        let gap_big = with_tail.es2 - truncated_big.es2;
        let gap_small = with_tail.es2 - truncated_small.es2;
        // Remaining gap scales like M^{2d−1}.
        let ratio = gap_big / gap_small;
        assert_relative_eq!(ratio, 64f64.powf(2.0 * d - 1.0), max_relative = 0.02);
    }

    #[test]
    fn tail_continuation_is_noop_for_short_memory() {
        let c = expand_ma::<f64>(&LinearProcessSpec::arma(vec![0.5], vec![0.5], exp1()), 500).unwrap();
        assert_eq!(
            exact_moments_with_tail(&c, 100, &exp1()).unwrap(),
            exact_moments_oracle(&c, 100, &exp1())
        );
    }
}
