//! Reproducible sample paths of linear processes.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::process::{default_truncation, expand_ma, InnovationSpec, LinearProcessSpec, MaCoefficients, ProcessError};
use crate::rng::{stream, StreamRng};

/// Paths with `n · support(a)` above this use FFT convolution.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("sample size must be at least 1")]
    EmptyPath,
    #[error("innovation law {0} has no sampler (moments only)")]
    NotSimulable(InnovationSpec),
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
}

/// Observations `X₁ … X_n` with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SamplePath {
    /// Wraps ingested data (no provenance).
    pub fn from_observations(x: Vec<f64>) -> Result<Self, SimulationError> {
        if x.is_empty() {
            return Err(SimulationError::EmptyPath);
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(SimulationError::NonFinite(i));
        }
        Ok(Self {
            x,
            spec_fingerprint: None,
            seed: None,
            truncation_m: None,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Partial sums `S_1 … S_n`.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.x
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect()
    }
}

/// Short hex digest identifying a process spec.
pub fn spec_fingerprint(spec: &LinearProcessSpec) -> String {
    let digest = Sha256::digest(spec.to_json().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionStrategy {
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Draws `count` centered innovations.
pub fn draw_innovations(law: &InnovationSpec, rng: &mut StreamRng, count: usize) -> Result<Vec<f64>, SimulationError> {
    match *law {
        InnovationSpec::Gaussian { sigma2 } => {
            let sd = sigma2.sqrt();
            Ok((0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
        }
        InnovationSpec::CenteredExponential { rate } => {
            let exp = Exp::new(rate).map_err(|_| ProcessError::InvalidParameter(format!("rate {rate}")))?;
            let mean = 1.0 / rate;
            Ok((0..count).map(|_| exp.sample(rng) - mean).collect())
        }
        custom @ InnovationSpec::Custom { .. } => Err(SimulationError::NotSimulable(custom)),
    }
}

/// `x[t] = Σ_i a_i e[t + M − i]` for `t < e.len() − M`, by direct summation.
pub fn convolve_valid_direct(e: &[f64], a: &[f64], m: usize) -> Vec<f64> {
    let n = e.len() - m;
    (0..n)
        .map(|t| {
            let end = t + m;
            a.iter().enumerate().take(end + 1).map(|(i, &ai)| ai * e[end - i]).sum()
        })
        .collect()
}

struct FftKernel {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex<f64>>,
}

impl FftKernel {
    fn new(a: &[f64], n: usize, m: usize) -> Self {
        let size = (n + m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        for (s, &ai) in spectrum.iter_mut().zip(a) {
            s.re = ai;
        }
        forward.process(&mut spectrum);
        Self {
            size,
            forward,
            inverse,
            spectrum,
        }
    }

    fn apply(&self, e: &[f64], m: usize) -> Vec<f64> {
        let n = e.len() - m;
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &v) in buf.iter_mut().zip(e) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        // Circular length ≥ len(e) leaves indices ≥ M free of wrap-around.
        buf[m..m + n].iter().map(|c| c.re * scale).collect()
    }
}

/// Same as [`convolve_valid_direct`], through zero-padded FFTs.
pub fn convolve_valid_fft(e: &[f64], a: &[f64], m: usize) -> Vec<f64> {
    FftKernel::new(a, e.len() - m, m).apply(e, m)
}

/// Reusable generator for many paths of one `(spec, n, M)`: the MA weights
/// and, when used, their spectrum are computed once.
pub struct PathGenerator {
    spec: LinearProcessSpec,
    n: usize,
    coeffs: MaCoefficients<f64>,
    fingerprint: String,
    fft: Option<FftKernel>,
    warnings: Vec<String>,
}

impl PathGenerator {
    pub fn new(spec: &LinearProcessSpec, n: usize, m: usize) -> Result<Self, SimulationError> {
        Self::with_strategy(spec, n, m, ConvolutionStrategy::Auto)
    }

    pub fn with_strategy(
        spec: &LinearProcessSpec,
        n: usize,
        m: usize,
        strategy: ConvolutionStrategy,
    ) -> Result<Self, SimulationError> {
        if n == 0 {
            return Err(SimulationError::EmptyPath);
        }
        if let law @ InnovationSpec::Custom { .. } = spec.innovation {
            return Err(SimulationError::NotSimulable(law));
        }
        let coeffs = expand_ma::<f64>(spec, m)?;
        let use_fft = match strategy {
            ConvolutionStrategy::Direct => false,
            ConvolutionStrategy::Fft => true,
            ConvolutionStrategy::Auto => n.saturating_mul(coeffs.support()) > DIRECT_CONVOLUTION_LIMIT,
        };
        let fft = use_fft.then(|| FftKernel::new(coeffs.nonzero_prefix(), n, m));

        let mut warnings = Vec::new();
        let recommended = default_truncation(spec, n)?;
        if spec.is_long_memory() && m < recommended {
            warnings.push(format!(
                "truncation M = {m} is below the long-memory default {recommended}; the path underrepresents low frequencies"
            ));
        } else if !spec.is_long_memory() && coeffs.tail_estimate() > 1e-10 * coeffs.sum_of_squares() {
            warnings.push(format!(
                "truncation M = {m} leaves squared-coefficient tail {:.3e}",
                coeffs.tail_estimate()
            ));
        }

        Ok(Self {
            spec: spec.clone(),
            n,
            coeffs,
            fingerprint: spec_fingerprint(spec),
            fft,
            warnings,
        })
    }

    pub fn coefficients(&self) -> &MaCoefficients<f64> {
        &self.coeffs
    }

    pub fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Draws `M + n` innovations `ε_{1−M} … ε_n` from `stream(seed)` and
    /// filters them.
    pub fn generate(&self, seed: u64) -> SamplePath {
        let m = self.coeffs.truncation_m();
        let mut rng = stream(seed);
        let e = draw_innovations(&self.spec.innovation, &mut rng, m + self.n).expect("law checked at construction");
        let mut x = match &self.fft {
            Some(kernel) => kernel.apply(&e, m),
            None => convolve_valid_direct(&e, self.coeffs.nonzero_prefix(), m),
        };
        if self.spec.mu != 0.0 {
            for v in &mut x {
                *v += self.spec.mu;
            }
        }
        SamplePath {
            x,
            spec_fingerprint: Some(self.fingerprint.clone()),
            seed: Some(seed),
            truncation_m: Some(m),
            warnings: self.warnings.clone(),
        }
    }
}

/// One path of `spec` of length `n`, MA truncation `m`.
pub fn simulate_path(spec: &LinearProcessSpec, n: usize, seed: u64, m: usize) -> Result<SamplePath, SimulationError> {
    Ok(PathGenerator::new(spec, n, m)?.generate(seed))
}

/// [`simulate_path`] with the default truncation.
pub fn simulate_default(spec: &LinearProcessSpec, n: usize, seed: u64) -> Result<SamplePath, SimulationError> {
    let m = default_truncation(spec, n)?;
    simulate_path(spec, n, seed, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::fractional_weights;

    fn exp1() -> InnovationSpec {
        InnovationSpec::CenteredExponential { rate: 1.0 }
    }

    #[test]
    fn white_noise_path_is_the_innovations_plus_mean() {
        let spec = LinearProcessSpec::white_noise(exp1()).with_mean(3.0);
        let path = simulate_path(&spec, 50, 11, 0).unwrap();
        let e = draw_innovations(&spec.innovation, &mut stream(11), 50).unwrap();
        let expected: Vec<f64> = e.iter().map(|v| v + 3.0).collect();
        assert_eq!(path.x, expected);
        assert_eq!(path.seed, Some(11));
        assert_eq!(path.truncation_m, Some(0));
    }

    #[test]
    fn identical_inputs_give_identical_paths() {
        let spec = LinearProcessSpec::fractional(0.3, exp1());
        let a = simulate_path(&spec, 300, 99, 5000).unwrap();
        let b = simulate_path(&spec, 300, 99, 5000).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&spec, 300, 100, 5000).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn fft_matches_direct() {
        let spec = LinearProcessSpec {
            d: 0.35,
            ..LinearProcessSpec::arma(vec![0.4], vec![0.3], InnovationSpec::standard_gaussian())
        };
        for (n, m) in [(1, 10), (257, 3000), (4096, 4096)] {
            let direct = PathGenerator::with_strategy(&spec, n, m, ConvolutionStrategy::Direct)
                .unwrap()
                .generate(5);
            let fft = PathGenerator::with_strategy(&spec, n, m, ConvolutionStrategy::Fft)
                .unwrap()
                .generate(5);
            assert_eq!(direct.x.len(), n);
            for (u, v) in direct.x.iter().zip(&fft.x) {
                assert!((u - v).abs() < 1e-10, "n={n} m={m}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn strategy_selection() {
        let spec = LinearProcessSpec::fractional(0.2, exp1());
        assert!(!PathGenerator::new(&spec, 100, 10_000).unwrap().uses_fft());
        assert!(PathGenerator::new(&spec, 1000, 10_000).unwrap().uses_fft());
        let arma = LinearProcessSpec::arma(vec![0.5], vec![0.5], exp1());
        assert!(!PathGenerator::new(&arma, 50_000, 60).unwrap().uses_fft());
    }

    #[test]
    fn truncation_warnings() {
        let spec = LinearProcessSpec::fractional(0.2, exp1());
        assert!(!PathGenerator::new(&spec, 100, 100).unwrap().warnings().is_empty());
        assert!(PathGenerator::new(&spec, 100, 10_000).unwrap().warnings().is_empty());
        let arma = LinearProcessSpec::arma(vec![0.9], vec![], exp1());
        assert!(!PathGenerator::new(&arma, 100, 5).unwrap().warnings().is_empty());
        assert!(PathGenerator::new(&arma, 100, 400).unwrap().warnings().is_empty());
    }

    #[test]
    fn custom_law_is_not_simulable() {
        let spec = LinearProcessSpec::white_noise(InnovationSpec::Custom {
            sigma2: 1.0,
            eta: 2.0,
            m4: 9.0,
            m6: 265.0,
        });
        assert!(matches!(
            simulate_path(&spec, 10, 1, 0),
            Err(SimulationError::NotSimulable(_))
        ));
    }

    #[test]
    fn sample_variance_matches_gamma_zero() {
        // γ(0) = σ² Σ a_i² over the truncated weights.
        let d = 0.4;
        let n = 5000;
        let m = 50_000;
        let spec = LinearProcessSpec::fractional(d, exp1());
        let gen = PathGenerator::new(&spec, n, m).unwrap();
        let gamma0: f64 = fractional_weights::<f64>(d, m).iter().map(|c| c * c).sum();
        // 400 seeds: the standard error of the mean is about 1.1%.
        let seeds = 400;
        let mean_var = (0..seeds)
            .map(|s| {
                let x = gen.generate(s).x;
                // Known mean zero: variance about μ, not about X̄.
                x.iter().map(|v| v * v).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / seeds as f64;
        assert!((mean_var / gamma0 - 1.0).abs() < 0.05, "{mean_var} vs {gamma0}");
    }

    #[test]
    fn white_noise_mean_z_score() {
        let spec = LinearProcessSpec::white_noise(exp1()).with_mean(1.5);
        let n = 400;
        let gen = PathGenerator::new(&spec, n, 0).unwrap();
        let means: Vec<f64> = (0..200)
            .map(|s| gen.generate(s).x.iter().sum::<f64>() / n as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / 200.0;
        let se = (1.0 / n as f64).sqrt() / (200f64).sqrt();
        assert!(((grand - 1.5) / se).abs() < 4.0);
    }

    #[test]
    fn partial_sums_and_validation() {
        let p = SamplePath::from_observations(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.partial_sums(), vec![1.0, 3.0, 6.0]);
        assert_eq!(SamplePath::from_observations(vec![]), Err(SimulationError::EmptyPath));
        assert_eq!(
            SamplePath::from_observations(vec![1.0, f64::NAN]),
            Err(SimulationError::NonFinite(1))
        );
    }

    #[test]
    fn fingerprint_distinguishes_specs() {
        let a = spec_fingerprint(&LinearProcessSpec::fractional(0.2, exp1()));
        let b = spec_fingerprint(&LinearProcessSpec::fractional(0.3, exp1()));
        assert_eq!(a.len(), 16);
        assert_ne!(a, b);
        assert_eq!(a, spec_fingerprint(&LinearProcessSpec::fractional(0.2, exp1())));
    }
}
