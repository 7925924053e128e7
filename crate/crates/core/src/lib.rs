//! Skewness of partial sums of short- and long-memory linear processes.
//!
//! * [`process`]: FARIMA(p,d,q) specifications and their MA(∞) weights.
//! * [`simulate`]: reproducible sample paths.
//! * [`analytic`]: the limiting constant `k(d)`, moment limits and an
//!   exact finite-`n` moment oracle.
//! * [`estimators`]: `γ̂`, `v̂`, `Δ̄`, `S̄₃` and `k̂(d)`.
//! * [`montecarlo`]: replicated experiments and MSE tables.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix them at `f64`.

pub mod analytic;
pub mod estimators;
pub mod montecarlo;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod series_io;
pub mod simulate;
pub mod summation;

pub use analytic::{exact_moments_oracle, exact_moments_with_tail, k_of_d, moment_limit, AnalyticError};
pub use estimators::{default_bandwidths, k_hat, BandwidthPlan, EstimatorError};
pub use montecarlo::{emit_table, run_experiment, ExperimentConfig, MonteCarloError, MseRow, TableFormat};
pub use process::{InnovationSpec, LinearProcessSpec, ProcessError};
pub use scalar::Real;
pub use simulate::{simulate_path, SamplePath, SimulationError};

pub type MaCoefficients = process::MaCoefficients<f64>;
pub type AnalyticConstants = analytic::AnalyticConstants<f64>;
pub type MomentLimit = analytic::MomentLimit<f64>;
pub type ExactMoments = analytic::ExactMoments<f64>;
pub type SkewEstimate = estimators::SkewEstimate<f64>;
