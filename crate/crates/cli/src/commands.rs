//! Subcommand implementations. Each command parses nothing itself: it takes
//! an argument struct (clap-derived, so the binary and integration tests
//! share one definition), does the work, and returns the rendered output
//! with its exit code.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::Value;

use rank_verify::baselines::{hsd_quantile_with_workers, hsd_verify};
use rank_verify::clb::{clb_exact, clb_fast, default_tol, BoundValue, LowerBound};
use rank_verify::matrix::Matrix;
use rank_verify::numerics::Probability;
use rank_verify::selection::TieBreak;
use rank_verify::sim::{
    estimate_conditional_with_workers, scenario_negative_dependence, scenario_tightness,
    Estimand, Scenario, SimMethod,
};
use rank_verify::verifier::{verify_with, Method, VerificationReport};

use crate::input::{load, LoadedInput};
use crate::json::{canonical, canonical_of, format_float};
use crate::{CliError, CliResult};

/// What a command hands back to the binary: text for stdout plus the
/// process exit code.
#[derive(Debug)]
pub struct CmdOutput {
    pub exit_code: i32,
    pub stdout: String,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input document: JSON by default, or the observations CSV when
    /// --covariance is given.
    #[arg(long)]
    pub input: PathBuf,
    /// Covariance CSV paired with an observations CSV --input.
    #[arg(long)]
    pub covariance: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self) -> CliResult<LoadedInput> {
        load(&self.input, self.covariance.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMethodArg {
    Full,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TiesArg {
    Error,
    BreakLowIndex,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Size of the claimed top set.
    #[arg(long)]
    pub k: usize,
    /// Margin the boundary mean gap must clear.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = VerifyMethodArg::Full)]
    pub method: VerifyMethodArg,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Boundary-tie handling: refuse, or break toward the lower index.
    #[arg(long, value_enum, default_value_t = TiesArg::Error)]
    pub ties: TiesArg,
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<CmdOutput> {
    let loaded = args.input.load()?;
    let alpha = Probability::new(args.alpha)?;
    let method = match args.method {
        VerifyMethodArg::Full => Method::Full,
        VerifyMethodArg::Fast => Method::FastOnly,
    };
    let ties = match args.ties {
        TiesArg::Error => TieBreak::Error,
        TiesArg::BreakLowIndex => TieBreak::BreakLowIndex,
    };
    let report = verify_with(
        &loaded.model,
        args.k,
        args.delta,
        alpha,
        method,
        ties,
        loaded.family,
    )?;
    let stdout = match args.format {
        OutputFormat::Json => canonical_of(&report),
        OutputFormat::Text => render_verify_text(&report, loaded.labels.as_deref()),
    };
    Ok(CmdOutput {
        exit_code: if report.reject { 0 } else { 1 },
        stdout,
    })
}

fn index_name(idx: usize, labels: Option<&[String]>) -> String {
    labels
        .and_then(|l| l.get(idx).cloned())
        .unwrap_or_else(|| idx.to_string())
}

fn extended(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn kebab<T: serde::Serialize>(value: &T) -> String {
    match serde_json::to_value(value).expect("enum serialization") {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn render_verify_text(report: &VerificationReport, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    let line = |out: &mut String, key: &str, value: String| {
        out.push_str(&format!("{key:<22} {value}\n"));
    };
    line(&mut out, "reject", yes_no(report.reject).into());
    line(&mut out, "alpha", report.alpha.to_string());
    line(&mut out, "delta", report.delta.to_string());
    line(&mut out, "method", kebab(&report.method));
    line(
        &mut out,
        "worst pair",
        format!(
            "{} > {}",
            index_name(report.worst_pair.0, labels),
            index_name(report.worst_pair.1, labels)
        ),
    );
    line(&mut out, "worst p", report.worst_p.to_string());
    let fast = &report.fast_check;
    line(
        &mut out,
        "fast check",
        format!(
            "{} (standardized gap {}, two-sided p {})",
            if fast.passes { "pass" } else { "fail" },
            fast.d_plus,
            fast.p_two_sided
        ),
    );
    let reduction = match &report.reduction_detected {
        None => "none".to_string(),
        Some(tag) => match tag.parameter {
            Some(p) => format!("{} (parameter {p})", kebab(&tag.kind)),
            None => kebab(&tag.kind),
        },
    };
    line(&mut out, "reduction", reduction);
    line(&mut out, "tie broken", yes_no(report.tie_broken).into());
    if report.near_zero_rho_excluded > 0 {
        line(
            &mut out,
            "near-zero rho skipped",
            report.near_zero_rho_excluded.to_string(),
        );
    }
    if !report.all_pairs.is_empty() {
        out.push_str("pairs (selective p, truncation window):\n");
        for sp in &report.all_pairs {
            out.push_str(&format!(
                "  {} > {}  p {}  window [{}, {}]\n",
                index_name(sp.i, labels),
                index_name(sp.j, labels),
                sp.p,
                extended(sp.trunc_lo),
                extended(sp.trunc_hi),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClbMethodArg {
    Exact,
    Fast,
}

#[derive(Debug, Clone, Args)]
pub struct ClbArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Size of the claimed top set.
    #[arg(long)]
    pub k: usize,
    /// One minus the confidence level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ClbMethodArg::Exact)]
    pub method: ClbMethodArg,
    /// Bisection tolerance for the exact method; defaults to a
    /// scale-relative value.
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn cmd_clb(args: &ClbArgs) -> CliResult<CmdOutput> {
    let loaded = args.input.load()?;
    let alpha = Probability::new(args.alpha)?;
    let bound: LowerBound = match args.method {
        ClbMethodArg::Exact => {
            let tol = args.tol.unwrap_or_else(|| default_tol(&loaded.model));
            clb_exact(&loaded.model, args.k, alpha, tol)?
        }
        ClbMethodArg::Fast => clb_fast(&loaded.model, args.k, alpha)?,
    };
    let positive = match bound.value {
        BoundValue::Finite(v) => v >= 0.0,
        BoundValue::Unbounded => true,
        BoundValue::MinusInfinity => false,
    };
    Ok(CmdOutput {
        exit_code: if positive { 0 } else { 1 },
        stdout: canonical_of(&bound),
    })
}

#[derive(Debug, Clone)]
pub enum ScenarioArg {
    NegativeDependence,
    Tightness,
    File(PathBuf),
}

pub fn parse_scenario(s: &str) -> Result<ScenarioArg, String> {
    match s {
        "negative-dependence" => Ok(ScenarioArg::NegativeDependence),
        "tightness" => Ok(ScenarioArg::Tightness),
        _ => match s.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(ScenarioArg::File(PathBuf::from(path))),
            _ => Err(format!(
                "expected negative-dependence, tightness, or file:<path>, got {s:?}"
            )),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimandArg {
    Power,
    FalseRejection,
    ClbCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethodArg {
    Full,
    FastOnly,
    Hsd,
    ClbExact,
    ClbFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// negative-dependence, tightness, or file:<path> with a scenario
    /// document {mu, sigma, k, name}.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = EstimandArg::Power)]
    pub estimand: EstimandArg,
    #[arg(long, value_enum, default_value_t = SimMethodArg::Full)]
    pub method: SimMethodArg,
    /// Total draws before conditioning.
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    /// Omit for a fresh seed; the seed used is always recorded in the output.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Conditioning target set, comma-separated indices; defaults to
    /// 0..k.
    #[arg(long)]
    pub target_s: Option<String>,
    /// Dimension of the tightness scenario.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Selection size of the tightness scenario.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Far-block offset of the tightness scenario, in largest-sd units.
    #[arg(long, default_value_t = 20.0)]
    pub spread: f64,
    #[arg(long, value_enum, default_value_t = SimFormat::Json)]
    pub format: SimFormat,
}

/// Seed for runs that did not fix one; mixed from the clock and the
/// process id, and always echoed in the output so the run can be replayed.
fn generate_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos ^ u64::from(std::process::id())
}

fn parse_target(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|cell| {
            cell.trim().parse().map_err(|_| CliError::Usage {
                message: format!("--target-s: not an index: {:?}", cell.trim()),
            })
        })
        .collect()
}

fn resolve_scenario(args: &SimulateArgs) -> CliResult<Scenario> {
    match &args.scenario {
        ScenarioArg::NegativeDependence => Ok(scenario_negative_dependence()),
        ScenarioArg::Tightness => {
            let mut sigma = Matrix::zeros(args.n);
            for i in 0..args.n {
                sigma.set(i, i, 1.0);
            }
            Ok(scenario_tightness(args.n, args.k, args.delta, sigma, args.spread)?)
        }
        ScenarioArg::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs, workers: usize) -> CliResult<CmdOutput> {
    let scenario = resolve_scenario(args)?;
    let alpha = Probability::new(args.alpha)?;
    let estimand = match args.estimand {
        EstimandArg::Power => Estimand::Power,
        EstimandArg::FalseRejection => Estimand::FalseRejection,
        EstimandArg::ClbCoverage => Estimand::ClbCoverage,
    };
    let method = match args.method {
        SimMethodArg::Full => SimMethod::Full,
        SimMethodArg::FastOnly => SimMethod::FastOnly,
        SimMethodArg::Hsd => SimMethod::Hsd,
        SimMethodArg::ClbExact => SimMethod::ClbExact,
        SimMethodArg::ClbFast => SimMethod::ClbFast,
    };
    let target = match &args.target_s {
        Some(s) => parse_target(s)?,
        None => (0..scenario.k).collect(),
    };
    let seed = args.seed.unwrap_or_else(generate_seed);
    let result = estimate_conditional_with_workers(
        &scenario,
        &target,
        args.delta,
        alpha,
        method,
        estimand,
        args.reps,
        seed,
        workers,
    )?;
    let stdout = match args.format {
        SimFormat::Json => {
            let mut map = match serde_json::to_value(&result).expect("result serialization") {
                Value::Object(m) => m,
                _ => unreachable!("result serializes as an object"),
            };
            map.insert("scenario".into(), Value::String(scenario.name.clone()));
            map.insert(
                "method".into(),
                serde_json::to_value(method).expect("enum serialization"),
            );
            map.insert("workers".into(), workers.into());
            canonical(&Value::Object(map))
        }
        SimFormat::Csv => {
            let header = "scenario,estimand,method,replicates,conditioning_event_rate,\
                          conditional_rate,std_error,seed,alpha,delta";
            format!(
                "{header}\n{},{},{},{},{},{},{},{},{},{}",
                scenario.name,
                kebab(&result.estimand),
                kebab(&method),
                result.replicates,
                format_float(result.conditioning_event_rate),
                format_float(result.conditional_rate),
                format_float(result.std_error),
                result.seed,
                format_float(result.alpha.value()),
                format_float(result.delta),
            )
        }
    };
    Ok(CmdOutput {
        exit_code: 0,
        stdout,
    })
}

#[derive(Debug, Clone, Args)]
pub struct HsdArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Size of the claimed top set.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo draws for the simultaneous quantile.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Omit for a fresh seed; the seed used is recorded in the output.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_hsd(args: &HsdArgs, workers: usize) -> CliResult<CmdOutput> {
    let loaded = args.input.load()?;
    let alpha = Probability::new(args.alpha)?;
    let seed = args.seed.unwrap_or_else(generate_seed);
    let quantile =
        hsd_quantile_with_workers(loaded.model.sigma(), alpha, args.reps, seed, workers)?;
    let hsd_reject = hsd_verify(&loaded.model, args.k, alpha, &quantile)?;
    let full = verify_with(
        &loaded.model,
        args.k,
        0.0,
        alpha,
        Method::Full,
        TieBreak::BreakLowIndex,
        loaded.family,
    )?;
    let mut map = serde_json::Map::new();
    map.insert(
        "quantile".into(),
        serde_json::to_value(&quantile).expect("quantile serialization"),
    );
    map.insert("hsd_reject".into(), hsd_reject.into());
    map.insert("full_reject".into(), full.reject.into());
    map.insert(
        "dominance_ok".into(),
        (!(hsd_reject && !full.reject)).into(),
    );
    map.insert(
        "alpha".into(),
        serde_json::to_value(alpha.value()).expect("alpha serialization"),
    );
    map.insert("k".into(), args.k.into());
    Ok(CmdOutput {
        exit_code: if hsd_reject { 0 } else { 1 },
        stdout: canonical(&Value::Object(map)),
    })
}
