//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or data errors, 2 when the instance
//! is infeasible.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sparsecs_core::conic::ConicSolver;
use sparsecs_core::sos::verify_certificate;
use sparsecs_core::Error;

use crate::backend::ClarabelSolver;
use crate::experiments::{self, Method, MethodOptions, SweepConfig, SyntheticSpec};
use crate::io::{self, CertificateFile, DataError, SCHEMA_VERSION};

pub const SOLVER_ENV: &str = "SPARSECS_SOLVER";

#[derive(Debug, Parser)]
#[command(name = "sparsecs", version, about = "Sparse recovery by branch-and-bound and conic relaxations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and print a JSON record.
    Solve(SolveArgs),
    /// Run a grid of synthetic experiments and write a CSV table.
    Sweep(SweepArgs),
    /// Write a synthetic instance as JSON.
    Generate(GenerateArgs),
    /// Check a saved SOS certificate against an instance.
    VerifyCert(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "bnb", value_parser = parse_method)]
    pub method: Method,
    /// Relative optimality gap at which branch-and-bound stops.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Wall-clock budget such as "600s" or "10m".
    #[arg(long, value_parser = humantime::parse_duration)]
    pub time_limit: Option<Duration>,
    /// Use perspective node bounds when gamma is below gamma0.
    #[arg(long)]
    pub strict: bool,
    /// Restrict branch-and-bound to columns with |x_BPD| above this value.
    #[arg(long)]
    pub backbone: Option<f64>,
    /// Report the raw BPD / IRWL1 vector instead of its greedy rounding.
    #[arg(long)]
    pub no_round: bool,
    /// Print a progress line to stderr every this many nodes.
    #[arg(long)]
    pub progress: Option<usize>,
    /// Where to write the certificate of `sos-bound`.
    #[arg(long)]
    pub certificate_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated list overriding the methods of the config.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = experiments::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the planted signal as a JSON array.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub certificate: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method `{s}` (expected one of {})", names.join(", "))
    })
}

/// JSON record printed by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub schema_version: u32,
    pub method: String,
    pub sparsity: Option<usize>,
    pub objective: Option<f64>,
    pub residual_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub runtime_ms: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Infeasible(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn backend() -> anyhow::Result<ClarabelSolver> {
    match std::env::var(SOLVER_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(ClarabelSolver::new()),
        Ok(v) if v.eq_ignore_ascii_case("clarabel") => Ok(ClarabelSolver::new()),
        Ok(v) => bail!("{SOLVER_ENV}={v}: only `clarabel` is available"),
        Err(e) => bail!("{SOLVER_ENV}: {e}"),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status. Records go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Generate(a) => cmd_generate(&a),
        Command::VerifyCert(a) => cmd_verify(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
        Err(Failure::Infeasible(msg)) => {
            let _ = writeln!(err, "infeasible: {msg}");
            2
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(args, &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let inst = io::read_instance(&a.instance).with_context(|| format!("loading {}", a.instance.display()))?;
    let solver = backend()?;
    let opts = MethodOptions {
        time_limit: a.time_limit,
        delta: a.delta,
        strict_bounds: a.strict,
        backbone_threshold: a.backbone,
        round: !a.no_round,
        progress_every: a.progress,
        ..MethodOptions::default()
    };
    let outcome = match experiments::run_method(&solver as &dyn ConicSolver, &inst, a.method, &opts) {
        Ok(o) => o,
        Err(Error::InfeasibleInstance) => {
            write_record(out, &infeasible_record(a.method))?;
            return Err(Failure::Infeasible("no point satisfies the residual constraint".into()));
        }
        Err(e) => return Err(Failure::Usage(e.into())),
    };
    if outcome.infeasible {
        write_record(out, &infeasible_record(a.method))?;
        return Err(Failure::Infeasible("branch-and-bound proved infeasibility".into()));
    }
    let (sparsity, objective, residual_sq, x) = match (&outcome.x, a.method) {
        (Some(x), m) if m != Method::SocBound => (
            Some(x.sparsity()),
            Some(inst.objective(&x.x)),
            Some(inst.residual_sq(&x.x)),
            Some(x.x.iter().copied().collect()),
        ),
        (x, _) => (
            None,
            outcome.lower_bound,
            x.as_ref().map(|x| inst.residual_sq(&x.x)),
            x.as_ref().map(|x| x.x.iter().copied().collect()),
        ),
    };
    let record = SolveRecord {
        schema_version: SCHEMA_VERSION,
        method: a.method.name().into(),
        sparsity,
        objective,
        residual_sq,
        lower_bound: outcome.lower_bound,
        gap: outcome.gap,
        runtime_ms: outcome.runtime.as_secs_f64() * 1e3,
        status: outcome.status.clone(),
        nodes: outcome.nodes,
        warnings: outcome.warnings.clone(),
        x,
    };
    write_record(out, &record)?;
    if let (Some(path), Some(cert)) = (&a.certificate_out, &outcome.certificate) {
        io::write_json(path, &CertificateFile::from_certificate(cert))?;
    }
    Ok(())
}

fn infeasible_record(method: Method) -> SolveRecord {
    SolveRecord {
        schema_version: SCHEMA_VERSION,
        method: method.name().into(),
        sparsity: None,
        objective: None,
        residual_sq: None,
        lower_bound: None,
        gap: None,
        runtime_ms: 0.0,
        status: "Infeasible".into(),
        nodes: None,
        warnings: Vec::new(),
        x: None,
    }
}

fn write_record<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), DataError> {
    let line = io::to_json_precise(value)?;
    writeln!(out, "{line}").map_err(|source| DataError::Write {
        path: "<stdout>".into(),
        source,
    })
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut config: SweepConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(methods) = &a.methods {
        config.methods = methods.clone();
    }
    for &m in &config.methods {
        config.budget(m).with_context(|| format!("time budget of {m}"))?;
    }
    if a.jobs == 0 {
        return Err(anyhow::anyhow!("--jobs must be at least 1").into());
    }
    let solver = backend()?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let rows = experiments::run_sweep(&solver, &config, &MethodOptions::default(), a.jobs, BufWriter::new(file))?;
    for s in experiments::summarize(&rows) {
        write_record(out, &s)?;
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        n: a.n,
        m: a.m,
        k: a.k,
        sigma: a.sigma,
        alpha: a.alpha,
        seed: a.seed,
    };
    let (mut inst, truth) = experiments::generate(&spec)?;
    if let Some(g) = a.gamma {
        inst = inst.with_gamma(g)?;
    }
    io::write_instance(&a.out, &inst)?;
    if let Some(path) = &a.truth_out {
        io::write_json(path, &truth.iter().copied().collect::<Vec<f64>>())?;
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let inst = io::read_instance(&a.instance)?;
    let cert = io::read_certificate(&a.certificate)?;
    let valid = verify_certificate(&inst, &cert)?;
    #[derive(Serialize)]
    struct Verdict {
        schema_version: u32,
        valid: bool,
        bound: f64,
    }
    write_record(
        out,
        &Verdict {
            schema_version: SCHEMA_VERSION,
            valid,
            bound: cert.lambda,
        },
    )?;
    if valid {
        Ok(())
    } else {
        Err(anyhow::anyhow!("certificate does not verify").into())
    }
}
