//! Replicated simulation–estimation experiments and MSE tables.
//!
//! Replication `b` at sample size `n` draws from the stream
//! `derive_seed(base_seed, [n, b])`, so any partition of the replications
//! over threads or processes reproduces the same estimates. Per-replication
//! results are collected in index order and reduced sequentially.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{k_of_d, AnalyticError};
use crate::estimators::{default_bandwidths, estimate_d_gph, k_hat, BandwidthPlan, EstimatorError};
use crate::process::default_truncation;
use crate::process::{InnovationSpec, LinearProcessSpec, ProcessError};
use crate::rng::derive_seed;
use crate::simulate::{PathGenerator, SimulationError};
use crate::summation::CompensatedSum;

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;
pub const TABLE_SCHEMA_VERSION: u32 = 1;
pub const TABLE_SIZES: [usize; 3] = [200, 1000, 5000];
pub const TABLE_REPLICATIONS: u64 = 2000;
/// Default log-periodogram bandwidth exponent for the plug-in `d̂`.
pub const DEFAULT_GPH_FRAC: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("all {replications} replications at n = {n} were flagged (v̂ ≤ 0)")]
    AllFlagged { n: usize, replications: u64 },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// The rule of [`default_bandwidths`].
    #[default]
    #[serde(rename = "paper_default")]
    Standard,
    /// One plan per entry of `sizes`.
    Explicit { plans: Vec<BandwidthPlan> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DMode {
    /// Estimate with the true `d` of the spec.
    #[default]
    Known,
    /// Additionally report the plug-in `k̂(d̂)` with a log-periodogram `d̂`.
    Estimated {
        #[serde(default = "default_gph_frac")]
        bandwidth_frac: f64,
    },
}

fn default_gph_frac() -> f64 {
    DEFAULT_GPH_FRAC
}

fn default_schema() -> u32 {
    EXPERIMENT_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub spec: LinearProcessSpec,
    pub sizes: Vec<usize>,
    pub replications: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub bandwidth_rule: BandwidthRule,
    #[serde(default)]
    pub d_mode: DMode,
    /// MA truncation for every size; `None` uses the simulation default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(spec: LinearProcessSpec, sizes: Vec<usize>, replications: u64, base_seed: u64) -> Self {
        Self {
            schema_version: EXPERIMENT_SCHEMA_VERSION,
            spec,
            sizes,
            replications,
            base_seed,
            bandwidth_rule: BandwidthRule::Standard,
            d_mode: DMode::Known,
            truncation: None,
        }
    }

    /// The four preset designs, centred exponential(1) innovations:
    /// 1: ARMA(1,1) φ = θ = 0.5; 2: φ = θ = −0.5; 3: FARIMA(0,0.2,0);
    /// 4: FARIMA(0,0.4,0).
    pub fn preset_table(table: u8, replications: u64, base_seed: u64) -> Result<Self, MonteCarloError> {
        let exp1 = InnovationSpec::CenteredExponential { rate: 1.0 };
        let spec = match table {
            1 => LinearProcessSpec::arma(vec![0.5], vec![0.5], exp1),
            2 => LinearProcessSpec::arma(vec![-0.5], vec![-0.5], exp1),
            3 => LinearProcessSpec::fractional(0.2, exp1),
            4 => LinearProcessSpec::fractional(0.4, exp1),
            _ => {
                return Err(MonteCarloError::Config(format!(
                    "no preset table {table}; expected 1-4"
                )))
            }
        };
        Ok(Self::new(spec, TABLE_SIZES.to_vec(), replications, base_seed))
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let bad = |msg: String| Err(MonteCarloError::Config(msg));
        if self.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        self.spec.validate()?;
        if let InnovationSpec::Custom { .. } = self.spec.innovation {
            return bad("custom innovation laws cannot be simulated".into());
        }
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        if self.sizes.is_empty() {
            return bad("sizes must be nonempty".into());
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly increasing".into());
        }
        let min_n = match self.d_mode {
            DMode::Known => crate::estimators::MIN_SERIES_FOR_SKEW,
            DMode::Estimated { bandwidth_frac } => {
                if !(bandwidth_frac > 0.0 && bandwidth_frac <= 0.8) {
                    return bad(format!("bandwidth_frac = {bandwidth_frac} must lie in (0, 0.8]"));
                }
                crate::estimators::MIN_SERIES_FOR_GPH
            }
        };
        if self.sizes[0] < min_n {
            return bad(format!("sizes must be at least {min_n}"));
        }
        if let BandwidthRule::Explicit { plans } = &self.bandwidth_rule {
            if plans.len() != self.sizes.len() {
                return bad(format!("{} explicit plans for {} sizes", plans.len(), self.sizes.len()));
            }
        }
        for i in 0..self.sizes.len() {
            let n = self.sizes[i];
            let plan = self.plan_for(i);
            plan.validate(n)?;
            if !plan.satisfies_growth(n) {
                return bad(format!("bandwidths {plan:?} violate q_i² < n, q0 < n at n = {n}"));
            }
        }
        Ok(())
    }

    fn plan_for(&self, size_index: usize) -> BandwidthPlan {
        match &self.bandwidth_rule {
            BandwidthRule::Standard => default_bandwidths(self.sizes[size_index], self.spec.d),
            BandwidthRule::Explicit { plans } => plans[size_index],
        }
    }

    pub fn truncation_for(&self, n: usize) -> Result<usize, MonteCarloError> {
        match self.truncation {
            Some(m) => Ok(m),
            None => Ok(default_truncation(&self.spec, n)?),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MonteCarloError> {
        let config: Self = serde_json::from_str(text).map_err(|e| MonteCarloError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Estimates from one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub index: u64,
    /// `k̂(d)` at the true `d`; `None` when flagged.
    pub k_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_hat: Option<f64>,
    /// `k̂(d̂)`; `None` when not requested, flagged or `d̂` failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hat_plugin: Option<f64>,
}

/// One line of an MSE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    /// `Σ_b (k̂_b − k(d))² / B_valid`.
    pub mse: f64,
    pub mean_k_hat: f64,
    pub k_true: f64,
    /// Flagged replications left out of the MSE.
    pub excluded: u64,
    /// Monte Carlo standard error of `mse`: sample standard deviation of
    /// the squared errors over `√B_valid`.
    pub mc_std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<PluginSummary>,
}

/// Plug-in `k̂(d̂)` statistics, reported next to the known-`d` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluginSummary {
    pub mse: f64,
    pub mean_k_hat: f64,
    pub mean_d_hat: f64,
    pub excluded: u64,
    /// Mean `|k̂(d̂) − k̂(d)|` over replications where both exist.
    pub mean_abs_shift: f64,
}

/// Shared per-size state: one path generator and the estimation plan.
pub struct SizeRunner {
    n: usize,
    d: f64,
    base_seed: u64,
    plan: BandwidthPlan,
    d_mode: DMode,
    generator: PathGenerator,
}

impl SizeRunner {
    pub fn new(config: &ExperimentConfig, size_index: usize) -> Result<Self, MonteCarloError> {
        let n = *config
            .sizes
            .get(size_index)
            .ok_or_else(|| MonteCarloError::Config(format!("no size at index {size_index}")))?;
        let m = config.truncation_for(n)?;
        Ok(Self {
            n,
            d: config.spec.d,
            base_seed: config.base_seed,
            plan: config.plan_for(size_index),
            d_mode: config.d_mode,
            generator: PathGenerator::new(&config.spec, n, m)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &PathGenerator {
        &self.generator
    }

    pub fn replicate(&self, index: u64) -> Result<ReplicationEstimate, MonteCarloError> {
        let seed = derive_seed(self.base_seed, &[self.n as u64, index]);
        let path = self.generator.generate(seed);
        let est = k_hat(&path.x, self.d, &self.plan)?;
        let (d_hat, k_hat_plugin) = match self.d_mode {
            DMode::Known => (None, None),
            DMode::Estimated { bandwidth_frac } => match estimate_d_gph(&path.x, bandwidth_frac) {
                Ok(dh) => {
                    let plan = if dh > 0.0 {
                        default_bandwidths(self.n, dh)
                    } else {
                        self.plan
                    };
                    let plug = match plan.validate(self.n) {
                        Ok(()) => k_hat(&path.x, dh, &plan)?.k_hat,
                        Err(_) => None,
                    };
                    (Some(dh), plug)
                }
                Err(_) => (None, None),
            },
        };
        Ok(ReplicationEstimate {
            index,
            k_hat: est.k_hat,
            d_hat,
            k_hat_plugin,
        })
    }

    /// Replications `range`, in index order, over `workers` threads.
    pub fn replicate_range(
        &self,
        range: Range<u64>,
        workers: usize,
    ) -> Result<Vec<ReplicationEstimate>, MonteCarloError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
        pool.install(|| range.into_par_iter().map(|b| self.replicate(b)).collect())
    }
}

/// Replication estimates for one size; a building block for splitting a run
/// across processes.
pub fn run_replications(
    config: &ExperimentConfig,
    size_index: usize,
    range: Range<u64>,
    workers: usize,
) -> Result<Vec<ReplicationEstimate>, MonteCarloError> {
    config.validate()?;
    SizeRunner::new(config, size_index)?.replicate_range(range, workers)
}

/// Sequential reduction of replication estimates sorted by index.
pub fn summarize(n: usize, k_true: f64, estimates: &[ReplicationEstimate]) -> Result<MseRow, MonteCarloError> {
    let mut sorted = estimates.to_vec();
    sorted.sort_by_key(|e| e.index);

    let known: Vec<f64> = sorted.iter().filter_map(|e| e.k_hat).collect();
    if known.is_empty() {
        return Err(MonteCarloError::AllFlagged {
            n,
            replications: sorted.len() as u64,
        });
    }
    let (mse, mean_k_hat, mc_std_error) = error_moments(&known, k_true);

    let plugin = if sorted.iter().any(|e| e.d_hat.is_some() || e.k_hat_plugin.is_some()) {
        let plug: Vec<f64> = sorted.iter().filter_map(|e| e.k_hat_plugin).collect();
        let d_hats: Vec<f64> = sorted.iter().filter_map(|e| e.d_hat).collect();
        let shifts: Vec<f64> = sorted
            .iter()
            .filter_map(|e| Some((e.k_hat_plugin? - e.k_hat?).abs()))
            .collect();
        let (mse, mean_k_hat, _) = if plug.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            error_moments(&plug, k_true)
        };
        Some(PluginSummary {
            mse,
            mean_k_hat,
            mean_d_hat: mean(&d_hats),
            excluded: (sorted.len() - plug.len()) as u64,
            mean_abs_shift: mean(&shifts),
        })
    } else {
        None
    };

    Ok(MseRow {
        n,
        mse,
        mean_k_hat,
        k_true,
        excluded: (sorted.len() - known.len()) as u64,
        mc_std_error,
        plugin,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().copied().collect::<CompensatedSum<f64>>().value() / v.len() as f64
}

/// `(mse, mean k̂, standard error of mse)`.
fn error_moments(k: &[f64], k_true: f64) -> (f64, f64, f64) {
    let b = k.len() as f64;
    let sq: Vec<f64> = k.iter().map(|v| (v - k_true) * (v - k_true)).collect();
    let mse = mean(&sq);
    let se = if k.len() > 1 {
        let var = sq
            .iter()
            .map(|s| (s - mse) * (s - mse))
            .collect::<CompensatedSum<f64>>()
            .value()
            / (b - 1.0);
        (var / b).sqrt()
    } else {
        0.0
    };
    (mse, mean(k), se)
}

/// Runs every size of `config` on `workers` threads.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<Vec<MseRow>, MonteCarloError> {
    config.validate()?;
    let mo = config.spec.innovation.moments();
    let k_true = k_of_d(config.spec.d, mo.eta, mo.sigma2)?;
    (0..config.sizes.len())
        .map(|i| {
            let runner = SizeRunner::new(config, i)?;
            let estimates = runner.replicate_range(0..config.replications, workers)?;
            summarize(runner.n(), k_true, &estimates)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown table format '{other}' (csv, json, markdown)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub schema_version: u32,
    pub rows: Vec<MseRow>,
}

const COLUMNS: &str = "n,mse,mean_k_hat,k_true,excluded,mc_std_error";
const PLUGIN_COLUMNS: &str = "plugin_mse,plugin_mean_k_hat,plugin_mean_d_hat,plugin_excluded,plugin_mean_abs_shift";

/// Renders rows. CSV and JSON carry every field at full precision;
/// markdown is the two-column `n | MSE` layout of the reference tables.
pub fn emit_table(rows: &[MseRow], format: TableFormat) -> String {
    match format {
        TableFormat::Json => {
            let doc = TableDocument {
                schema_version: TABLE_SCHEMA_VERSION,
                rows: rows.to_vec(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("rows serialize");
            s.push('\n');
            s
        }
        TableFormat::Csv => {
            let with_plugin = rows.iter().any(|r| r.plugin.is_some());
            let mut s = String::from(COLUMNS);
            if with_plugin {
                s.push(',');
                s.push_str(PLUGIN_COLUMNS);
            }
            s.push('\n');
            for r in rows {
                let _ = write!(
                    s,
                    "{},{},{},{},{},{}",
                    r.n, r.mse, r.mean_k_hat, r.k_true, r.excluded, r.mc_std_error
                );
                if with_plugin {
                    match &r.plugin {
                        Some(p) => {
                            let _ = write!(
                                s,
                                ",{},{},{},{},{}",
                                p.mse, p.mean_k_hat, p.mean_d_hat, p.excluded, p.mean_abs_shift
                            );
                        }
                        None => s.push_str(",,,,,"),
                    }
                }
                s.push('\n');
            }
            s
        }
        TableFormat::Markdown => {
            let mut s = String::from("| n | MSE |\n|---:|---:|\n");
            for r in rows {
                let _ = writeln!(s, "| {} | {:.3} |", r.n, r.mse);
            }
            s
        }
    }
}

/// Reads back the JSON form of [`emit_table`].
pub fn parse_table_json(text: &str) -> Result<Vec<MseRow>, MonteCarloError> {
    let doc: TableDocument = serde_json::from_str(text).map_err(|e| MonteCarloError::Config(e.to_string()))?;
    if doc.schema_version != TABLE_SCHEMA_VERSION {
        return Err(MonteCarloError::Config(format!(
            "unsupported table schema_version {}",
            doc.schema_version
        )));
    }
    Ok(doc.rows)
}
