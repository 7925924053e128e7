//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use thiserror::Error;

use crate::scalar::Real;

// QUADPACK nodes and weights, kept at their published precision.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: value {value}, error estimate {error} after {intervals} subintervals")]
    NotConverged { value: f64, error: f64, intervals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: T,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Real> Tolerance<T> {
    pub fn new(abs: T, rel: T) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 2000,
        }
    }
}

#[derive(Clone, Copy)]
struct Panel<T> {
    lo: T,
    hi: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> Panel<T> {
    let half = T::lit(0.5);
    let center = half * (lo + hi);
    let radius = half * (hi - lo);

    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = radius * T::lit(x);
        let pair = f(center - dx) + f(center + dx);
        kron += T::lit(w) * pair;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * pair;
        }
    }

    Panel {
        lo,
        hi,
        value: kron * radius,
        error: ((kron - gauss) * radius).abs(),
    }
}

/// Integrates `f` over `[lo, hi]`, bisecting the panel with the largest
/// error estimate until the total error satisfies the tolerance.
pub fn integrate<T, F>(f: F, lo: T, hi: T, tol: Tolerance<T>) -> Result<Quadrature<T>, QuadratureError>
where
    T: Real,
    F: Fn(T) -> T,
{
    if lo == hi {
        return Ok(Quadrature {
            value: T::zero(),
            abs_error: T::zero(),
            intervals: 0,
        });
    }

    let mut panels = vec![kronrod(&f, lo, hi)];
    let roundoff = T::lit(100.0) * T::epsilon();
    loop {
        let value: T = panels.iter().map(|p| p.value).sum();
        let error: T = panels.iter().map(|p| p.error).sum();
        let target = tol.abs.max(tol.rel * value.abs()).max(roundoff * value.abs());
        if error <= target {
            return Ok(Quadrature {
                value,
                abs_error: error,
                intervals: panels.len(),
            });
        }
        if panels.len() >= tol.max_intervals {
            return Err(QuadratureError::NotConverged {
                value: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                intervals: panels.len(),
            });
        }

        let (worst, _) = panels.iter().enumerate().fold((0, T::neg_infinity()), |best, (i, p)| {
            if p.error > best.1 {
                (i, p.error)
            } else {
                best
            }
        });
        let p = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // Panel cannot be split further at this precision.
            return Err(QuadratureError::NotConverged {
                value: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                intervals: panels.len() + 1,
            });
        }
        panels.push(kronrod(&f, p.lo, mid));
        panels.push(kronrod(&f, mid, p.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 3.0 * x * x, 0.0, 2.0, Tolerance::new(1e-14, 0.0)).unwrap();
        assert_abs_diff_eq!(q.value, 64.0 / 6.0 - 8.0, epsilon = 1e-13);
        assert_eq!(q.intervals, 1);
    }

    #[test]
    fn endpoint_singularity_refines() {
        // integral of x^-0.5 on [0, 1] is 2
        let q = integrate(
            |x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 },
            0.0,
            1.0,
            Tolerance::new(1e-10, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-9);
        assert!(q.intervals > 1);
    }

    #[test]
    fn single_precision() {
        let q = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, Tolerance::new(1e-6, 0.0)).unwrap();
        assert!((q.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance {
            abs: 1e-15,
            rel: 0.0,
            max_intervals: 3,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).unwrap_err();
        assert!(matches!(err, QuadratureError::NotConverged { .. }));
    }
}
