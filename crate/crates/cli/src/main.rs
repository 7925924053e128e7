//! `lpskew`: simulate linear processes, evaluate limiting constants,
//! estimate the scaled skewness of the sample mean and reproduce the
//! Monte Carlo MSE tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 the
//! estimate was computed but flagged (`v̂ ≤ 0`).

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use lpskew_core::analytic::moment_limit;
use lpskew_core::estimators::{default_bandwidths, estimate_d_gph, k_hat, BandwidthPlan};
use lpskew_core::montecarlo::{emit_table, run_experiment, ExperimentConfig, TableFormat, TABLE_REPLICATIONS};
use lpskew_core::process::{default_truncation, InnovationSpec, LinearProcessSpec};
use lpskew_core::rng::GENERATOR;
use lpskew_core::series_io::{read_series, read_series_bytes, write_series, SeriesFormat};
use lpskew_core::simulate::PathGenerator;
use lpskew_core::AnalyticConstants;
use serde_json::{json, Value};

/// Seed used when `--seed` is absent.
const DEFAULT_SEED: u64 = 24_301;
const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "lpskew",
    version,
    about = "Skewness of partial sums of short- and long-memory linear processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sample path and write it as a series.
    Simulate(SimulateArgs),
    /// Estimate S̄₃, v̂ and k̂(d) from a series; prints JSON.
    Estimate(EstimateArgs),
    /// Print the limiting constants k(d), v(d), m(d), I₂, I₃ as JSON.
    Analytic(AnalyticArgs),
    /// Run a Monte Carlo experiment and print its MSE table.
    McTable(McTableArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Process spec JSON ({mu, ar, ma, d, innovation: {law, params}}).
    #[arg(long)]
    spec: PathBuf,
    /// Sample size.
    #[arg(long)]
    n: usize,
    /// Random seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// MA truncation M [default: max(10n, 10⁴) under long memory, else the geometric tail certificate].
    #[arg(long)]
    truncation: Option<usize>,
    /// Output format: csv or bin.
    #[arg(long, default_value = "csv", value_parser = parse_series_format)]
    format: SeriesFormat,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write path metadata (seed, truncation, generator, warnings) as JSON here.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum DArg {
    Auto,
    Value(f64),
}

fn parse_d(s: &str) -> Result<DArg, String> {
    if s == "auto" {
        return Ok(DArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(d) if (0.0..0.5).contains(&d) => Ok(DArg::Value(d)),
        Ok(d) => Err(format!("d = {d} is outside [0, 0.5)")),
        Err(_) => Err(format!("expected a number in [0, 0.5) or `auto`, got {s:?}")),
    }
}

fn parse_series_format(s: &str) -> Result<SeriesFormat, String> {
    s.parse()
}

fn parse_table_format(s: &str) -> Result<TableFormat, String> {
    s.parse()
}

fn parse_innovation(s: &str) -> Result<InnovationSpec, String> {
    s.parse().map_err(|e: lpskew_core::ProcessError| e.to_string())
}

#[derive(Args)]
struct EstimateArgs {
    /// Series file (CSV with header `x`, or binary); `-` reads stdin.
    #[arg(long = "in")]
    input: PathBuf,
    /// Memory parameter d in [0, 0.5), or `auto` for a log-periodogram estimate.
    #[arg(long, value_parser = parse_d)]
    d: DArg,
    /// Variance bandwidth [default: ⌈n^(0.5−d)⌉ if d > 0, else ⌈n^0.33⌉].
    #[arg(long)]
    q0: Option<usize>,
    /// Bandwidth for Δ̄(0) [default: ⌈n^0.2⌉ if d > 0, else ⌈n^0.33⌉].
    #[arg(long)]
    q1: Option<usize>,
    /// Bandwidth for Δ̄(h) [default: ⌈n^0.2⌉ if d > 0, else ⌈n^0.33⌉].
    #[arg(long)]
    q2: Option<usize>,
    /// Bandwidth for Δ̄(h, h′) [default: max(2, ⌈n^0.1⌉) if d > 0, else ⌈n^0.33⌉].
    #[arg(long)]
    q3: Option<usize>,
    /// Frequencies used by `--d auto`: the first ⌈n^frac⌉.
    #[arg(long, default_value_t = 0.5)]
    gph_frac: f64,
}

#[derive(Args)]
struct AnalyticArgs {
    /// Memory parameter d in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Innovation law: gaussian[:σ²], exp[:rate] or custom:σ²,η,m4,m6.
    #[arg(long, default_value = "exp:1", value_parser = parse_innovation)]
    innovation: InnovationSpec,
    /// AR coefficients φ₁,…,φ_p.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    ar: Vec<f64>,
    /// MA coefficients θ₁,…,θ_q.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    ma: Vec<f64>,
    /// Read the model from a spec JSON instead of --d/--innovation/--ar/--ma.
    #[arg(long, conflicts_with_all = ["d", "innovation", "ar", "ma"])]
    spec: Option<PathBuf>,
    /// Also report limits of E S_n^k for k = 2..=K.
    #[arg(long, default_value_t = 3)]
    max_moment: u32,
}

#[derive(Args)]
struct McTableArgs {
    /// Experiment config JSON.
    #[arg(long, required_unless_present = "table", conflicts_with = "table")]
    config: Option<PathBuf>,
    /// Use a preset design instead of --config (1-4).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    table: Option<u8>,
    /// Override the replication count [preset default: 2000].
    #[arg(long)]
    reps: Option<u64>,
    /// Override the sample sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Override the base seed [preset default: the documented default seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: csv, json or markdown.
    #[arg(long, default_value = "csv", value_parser = parse_table_format)]
    format: TableFormat,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: $LPSKEW_WORKERS, else the number of logical CPUs].
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<ExitCode, Failure>;

const FLAGGED: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Analytic(a) => analytic(a),
        Command::McTable(a) => mc_table(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty(value: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_spec(path: &Path) -> anyhow::Result<LinearProcessSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LinearProcessSpec::from_json(&text).with_context(|| format!("parsing spec {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Outcome {
    let spec = read_spec(&a.spec)?;
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let m = match a.truncation {
        Some(m) => m,
        None => default_truncation(&spec, a.n).map_err(anyhow::Error::from)?,
    };
    let gen = PathGenerator::new(&spec, a.n, m).map_err(anyhow::Error::from)?;
    let path = gen.generate(a.seed);
    for w in &path.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    write_series(&mut buf, &path.x, a.format).map_err(anyhow::Error::from)?;
    write_output(a.out.as_deref(), &buf)?;
    if let Some(meta) = &a.meta {
        let doc = json!({
            "schema_version": OUTPUT_SCHEMA_VERSION,
            "n": a.n,
            "seed": a.seed,
            "truncation_m": m,
            "truncation_default": a.truncation.is_none(),
            "convolution": if gen.uses_fft() { "fft" } else { "direct" },
            "generator": GENERATOR,
            "spec_fingerprint": path.spec_fingerprint,
            "warnings": path.warnings,
        });
        write_output(Some(meta), &pretty(&doc))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn read_input(path: &Path) -> anyhow::Result<Vec<f64>> {
    if path == Path::new("-") {
        let mut bytes = Vec::new();
        io::stdin().lock().read_to_end(&mut bytes)?;
        Ok(read_series_bytes(&bytes)?)
    } else {
        read_series(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn estimate(a: EstimateArgs) -> Outcome {
    let x = read_input(&a.input)?;
    let n = x.len();
    let (d, d_source) = match a.d {
        DArg::Value(d) => (d, "given"),
        DArg::Auto => (
            estimate_d_gph(&x, a.gph_frac).map_err(anyhow::Error::from)?,
            "log_periodogram",
        ),
    };
    let base = default_bandwidths(n, d);
    let plan = BandwidthPlan {
        q0: a.q0.unwrap_or(base.q0),
        q1: a.q1.unwrap_or(base.q1),
        q2: a.q2.unwrap_or(base.q2),
        q3: a.q3.unwrap_or(base.q3),
    };
    let est = k_hat(&x, d, &plan).map_err(anyhow::Error::from)?;
    let mut doc = serde_json::to_value(est).expect("estimate serializes");
    let obj = doc.as_object_mut().expect("estimate is an object");
    obj.insert("schema_version".into(), OUTPUT_SCHEMA_VERSION.into());
    obj.insert("d_source".into(), d_source.into());
    write_output(None, &pretty(&doc))?;
    if est.flagged {
        eprintln!(
            "warning: long-run variance estimate v̂ = {} is not positive; k̂ is undefined",
            est.v_hat
        );
        Ok(ExitCode::from(FLAGGED))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn analytic(a: AnalyticArgs) -> Outcome {
    let spec = match &a.spec {
        Some(path) => read_spec(path)?,
        None => {
            let spec = LinearProcessSpec {
                mu: 0.0,
                ar: a.ar.clone(),
                ma: a.ma.clone(),
                d: a.d,
                innovation: a.innovation,
            };
            spec.validate().map_err(anyhow::Error::from)?;
            spec
        }
    };
    if a.max_moment < 2 {
        return Err(Failure::Usage("--max-moment must be at least 2".into()));
    }
    let c = AnalyticConstants::for_spec(&spec).map_err(anyhow::Error::from)?;
    let limits = (2..=a.max_moment)
        .map(|k| {
            let l = moment_limit(k, c.d, c.eta, c.sigma2, c.m)?;
            Ok(json!({"k": k, "limit": l.limit, "scaling_exponent": l.scaling_exponent}))
        })
        .collect::<Result<Vec<_>, lpskew_core::AnalyticError>>()
        .map_err(anyhow::Error::from)?;
    let mut doc = serde_json::to_value(c).expect("constants serialize");
    let obj = doc.as_object_mut().expect("constants are an object");
    obj.insert("schema_version".into(), OUTPUT_SCHEMA_VERSION.into());
    obj.insert("innovation".into(), spec.innovation.to_string().into());
    obj.insert("moment_limits".into(), limits.into());
    write_output(None, &pretty(&doc))?;
    Ok(ExitCode::SUCCESS)
}

fn workers(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(w) = flag {
        return if w >= 1 {
            Ok(w)
        } else {
            Err(Failure::Usage("--workers must be a positive integer".into()))
        };
    }
    match std::env::var("LPSKEW_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(Failure::Usage(format!(
                "LPSKEW_WORKERS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn mc_table(a: McTableArgs) -> Outcome {
    let workers = workers(a.workers)?;
    let mut config = match (&a.config, a.table) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| anyhow!("parsing config {}: {e}", path.display()))?
        }
        (None, Some(t)) => {
            ExperimentConfig::preset_table(t, TABLE_REPLICATIONS, DEFAULT_SEED).map_err(anyhow::Error::from)?
        }
        (None, None) => return Err(Failure::Usage("one of --config or --table is required".into())),
    };
    if let Some(r) = a.reps {
        config.replications = r;
    }
    if let Some(s) = a.sizes {
        config.sizes = s;
    }
    if let Some(s) = a.seed {
        config.base_seed = s;
    }
    let rows = run_experiment(&config, workers).map_err(anyhow::Error::from)?;
    write_output(a.out.as_deref(), emit_table(&rows, a.format).as_bytes())?;
    Ok(ExitCode::SUCCESS)
}
