//! The `memcap` command-line tool.
//!
//! Exit codes: 0 success, 1 numeric or internal failure (including a failed
//! verification check), 2 domain error, 3 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::avram_parter::{capped_test_function, ergodic_report_with_spectrum};
use crate::capacities::{
    asymptotic_capacity, capacity_of, exact_sum_lower_bound, nshot_lower_bound_with_tol,
    positive_q_region, BoundCoefficients, CapacityKind, ErrorBudget,
};
use crate::error::Error;
use crate::output::{to_csv, to_json_line, Cell, ErrorRecord, OutputRecord};
use crate::symbol::{channel_coefficients, max_transmissivity, ChannelParams, DEFAULT_COEFF_TOL};
use crate::toeplitz::{build_toeplitz, singular_values};
use crate::verify::{run_all, GridConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub const DEFAULT_MAX_N: usize = 4096;

#[derive(Debug, Parser)]
#[command(
    name = "memcap",
    version,
    about = "Non-asymptotic capacity bounds for lossy optical fibres with memory"
)]
pub struct Cli {
    /// Largest matrix order for which singular values are computed.
    #[arg(long, global = true, env = "MEMCAP_MAX_N", default_value_t = DEFAULT_MAX_N)]
    pub max_n: usize,

    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Append a timestamped line describing the run to this file.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower bound on the n-shot capacity, with its additive components.
    Capacity(CapacityArgs),
    /// Smallest number of channel uses whose lower bound reaches a target.
    UsesNeeded(UsesArgs),
    /// Singular values and per-mode transmissivities of the n×n Toeplitz corner.
    Spectrum(SpectrumArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Qubit,
    Ebit,
    Key,
}

impl From<Task> for CapacityKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Qubit => CapacityKind::Qubit,
            Task::Ebit => CapacityKind::Ebit,
            Task::Key => CapacityKind::Key,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Fibre transmissivity, in (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Memory parameter, in [0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Error tolerance, in (0, 1).
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Number of channel uses.
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Also report the mode-sum bound from the exact singular values (needed for n < 4).
    #[arg(long)]
    pub exact: bool,
    /// Absolute tolerance for the capacity integral.
    #[arg(long, default_value = "1e-10", allow_negative_numbers = true)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct UsesArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Error tolerance, in (0, 1).
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Number of qubits, ebits or key bits to deliver.
    #[arg(long, allow_negative_numbers = true)]
    pub target_k: f64,
    /// Absolute tolerance for the capacity integral.
    #[arg(long, default_value = "1e-10", allow_negative_numbers = true)]
    pub tol: f64,
    /// Solve with explicit `rate,sqrt_constant,penalty` instead of the channel's.
    #[arg(long, hide = true, value_name = "Q,C,P")]
    pub debug_coefficients: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Matrix order.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `quick`, `full`, or the path of a TOML grid file.
    #[arg(long, default_value = "quick")]
    pub grid: String,
}

/// What went wrong, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Library(Error),
    /// The command ran but reported failing checks.
    Checks(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Library(e) if e.is_domain() => EXIT_DOMAIN,
            Failure::Library(_) | Failure::Checks(_) | Failure::Io(_) => EXIT_NUMERIC,
        }
    }

    fn kind(&self) -> &str {
        match self {
            Failure::Usage(_) => "UsageError",
            Failure::Library(e) => e.kind(),
            Failure::Checks(_) => "CheckFailed",
            Failure::Io(_) => "IoError",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Checks(m) | Failure::Io(m) => m.clone(),
            Failure::Library(e) => e.to_string(),
        }
    }
}

/// Text written on success, and whether it is a failure report (verify only).
struct Rendered {
    text: String,
    failure: Option<Failure>,
}

impl Rendered {
    fn ok(text: String) -> Self {
        Self {
            text,
            failure: None,
        }
    }
}

fn json_text(record: &OutputRecord) -> String {
    let mut s = to_json_line(record).expect("output records serialize");
    s.push('\n');
    s
}

fn value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn check_max_n(n: u64, max_n: usize) -> Result<(), Failure> {
    if n > max_n as u64 {
        return Err(Failure::Usage(format!(
            "n = {n} exceeds the singular-value limit {max_n} (raise MEMCAP_MAX_N or --max-n)"
        )));
    }
    Ok(())
}

fn channel(args: &ChannelArgs) -> Result<ChannelParams, Failure> {
    Ok(ChannelParams::new(args.lambda, args.mu)?)
}

fn cmd_capacity(args: &CapacityArgs, max_n: usize) -> Result<Rendered, Failure> {
    let params = channel(&args.channel)?;
    let eps = ErrorBudget::new(args.epsilon)?;
    let kind: CapacityKind = args.task.into();
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    if args.n < 4 && !args.exact {
        return Err(Error::Domain(format!(
            "the sqrt(n) lower bound needs n >= 4 (got {}); pass --exact for the mode-sum bound, which holds for every n >= 1",
            args.n
        ))
        .into());
    }
    if args.exact {
        check_max_n(args.n, max_n)?;
    }
    let asymptotic = asymptotic_capacity(params, kind, args.tol)?;
    let bound = if args.n >= 4 {
        Some(nshot_lower_bound_with_tol(
            params, args.n, eps, kind, args.tol,
        )?)
    } else {
        None
    };
    let exact = if args.exact {
        Some(exact_sum_lower_bound(params, args.n as usize, eps, kind)?)
    } else {
        None
    };

    let mut warnings = Vec::new();
    if kind == CapacityKind::Qubit && !positive_q_region(params) {
        warnings.push(format!(
            "zero-capacity region: maximum transmissivity {} <= 1/2, the qubit bound is trivial",
            max_transmissivity(params)
        ));
    }
    if args.n < 4 {
        warnings.push("n < 4: only the mode-sum bound applies".to_string());
    }

    let text = match args.format {
        Format::Json => {
            let inputs = json!({
                "lambda": args.channel.lambda,
                "mu": args.channel.mu,
                "epsilon": args.epsilon,
                "n": args.n,
                "task": kind.name(),
                "exact": args.exact,
                "tol": args.tol,
            });
            let mut outputs = json!({ "asymptotic_capacity": asymptotic });
            if let Some(b) = &bound {
                outputs["bound"] = value(b);
            }
            if let Some(e) = exact {
                outputs["exact_sum_lower_bound"] = json!(e);
            }
            let mut record = OutputRecord::new("capacity", inputs, outputs);
            record.warnings = warnings;
            json_text(&record)
        }
        Format::Csv => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let header = [
                "task",
                "lambda",
                "mu",
                "epsilon",
                "n",
                "asymptotic_capacity",
                "lower",
                "raw_lower",
                "asymptotic_term",
                "sqrt_term",
                "penalty",
                "clamped",
                "exact_sum_lower_bound",
            ];
            let opt = |v: Option<f64>| Cell::Num(v.unwrap_or(f64::NAN));
            let row = vec![
                Cell::Text(kind.name().into()),
                Cell::Num(args.channel.lambda),
                Cell::Num(args.channel.mu),
                Cell::Num(args.epsilon),
                Cell::Int(args.n as i64),
                Cell::Num(asymptotic),
                opt(bound.map(|b| b.lower)),
                opt(bound.map(|b| b.raw_lower)),
                opt(bound.map(|b| b.components.asymptotic_term)),
                opt(bound.map(|b| b.components.sqrt_term)),
                opt(bound.map(|b| b.components.penalty)),
                bound.map_or(Cell::Text(String::new()), |b| Cell::Bool(b.clamped)),
                opt(exact),
            ];
            to_csv(&header, &[row])
        }
    };
    Ok(Rendered::ok(text))
}

fn parse_debug_coefficients(text: &str) -> Result<BoundCoefficients, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    match nums {
        Ok(v) if v.len() == 3 => Ok(BoundCoefficients {
            rate: v[0],
            sqrt_constant: v[1],
            penalty: v[2],
        }),
        _ => Err(Failure::Usage(format!(
            "--debug-coefficients expects three comma-separated numbers Q,C,P, got `{text}`"
        ))),
    }
}

fn cmd_uses_needed(args: &UsesArgs) -> Result<Rendered, Failure> {
    let params = channel(&args.channel)?;
    let eps = ErrorBudget::new(args.epsilon)?;
    let kind: CapacityKind = args.task.into();
    let coeffs = match &args.debug_coefficients {
        Some(text) => parse_debug_coefficients(text)?,
        None => BoundCoefficients::for_channel(params, eps, kind, args.tol)?,
    };
    let n = coeffs.uses_needed(args.target_k)?;
    let bound_at_n = coeffs.lower(n);
    let bound_below = (n > 4).then(|| coeffs.lower(n - 1));

    let text = match args.format {
        Format::Json => {
            let inputs = json!({
                "lambda": args.channel.lambda,
                "mu": args.channel.mu,
                "epsilon": args.epsilon,
                "task": kind.name(),
                "target_k": args.target_k,
                "tol": args.tol,
            });
            let mut outputs = json!({
                "n": n,
                "bound_at_n": bound_at_n,
                "coefficients": value(&coeffs),
            });
            if let Some(b) = bound_below {
                outputs["bound_at_n_minus_1"] = json!(b);
            }
            let mut record = OutputRecord::new("uses-needed", inputs, outputs);
            if args.debug_coefficients.is_some() {
                record
                    .warnings
                    .push("coefficients supplied by --debug-coefficients".into());
            }
            json_text(&record)
        }
        Format::Csv => to_csv(
            &["task", "target_k", "n", "bound_at_n", "bound_at_n_minus_1"],
            &[vec![
                Cell::Text(kind.name().into()),
                Cell::Num(args.target_k),
                Cell::Int(n as i64),
                Cell::Num(bound_at_n),
                Cell::Num(bound_below.unwrap_or(f64::NAN)),
            ]],
        ),
    };
    Ok(Rendered::ok(text))
}

fn cmd_spectrum(args: &SpectrumArgs, max_n: usize) -> Result<Rendered, Failure> {
    let params = channel(&args.channel)?;
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    check_max_n(args.n as u64, max_n)?;
    let coeffs = channel_coefficients(params, DEFAULT_COEFF_TOL)?;
    let spectrum = singular_values(&build_toeplitz(&coeffs, args.n))?;
    let rows: Vec<(usize, f64, f64, f64, f64)> = spectrum
        .values()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let eta = s * s;
            (
                i + 1,
                s,
                eta,
                capacity_of(eta, CapacityKind::Qubit),
                capacity_of(eta, CapacityKind::Ebit),
            )
        })
        .collect();
    let header = ["index", "singular_value", "transmissivity", "q", "k"];
    let text = match args.format {
        Format::Csv => to_csv(
            &header,
            &rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::Int(r.0 as i64),
                        Cell::Num(r.1),
                        Cell::Num(r.2),
                        Cell::Num(r.3),
                        Cell::Num(r.4),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::Json => {
            let inputs = json!({
                "lambda": args.channel.lambda,
                "mu": args.channel.mu,
                "n": args.n,
            });
            let mut outputs = json!({
                "singular_values": spectrum.values(),
                "transmissivities": spectrum.squares(),
                "q": rows.iter().map(|r| r.3).collect::<Vec<_>>(),
                "k": rows.iter().map(|r| r.4).collect::<Vec<_>>(),
            });
            if args.n >= 4 {
                let mut reports = serde_json::Map::new();
                for kind in [CapacityKind::Qubit, CapacityKind::Ebit] {
                    if capped_test_function(params, kind).is_ok() {
                        let r = ergodic_report_with_spectrum(params, kind, &coeffs, &spectrum)?;
                        reports.insert(kind.name().into(), value(&r));
                    }
                }
                outputs["ergodic_reports"] = Value::Object(reports);
            }
            json_text(&OutputRecord::new("spectrum", inputs, outputs))
        }
    };
    Ok(Rendered::ok(text))
}

fn load_grid(spec: &str) -> Result<GridConfig, Failure> {
    match spec {
        "quick" => Ok(GridConfig::quick()),
        "full" => Ok(GridConfig::full()),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read grid file {path}: {e}")))?;
            GridConfig::from_toml_str(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))
        }
    }
}

fn cmd_verify(args: &VerifyArgs, max_n: usize) -> Result<Rendered, Failure> {
    let grid = load_grid(&args.grid)?;
    if let Some(&n) = grid.ns.iter().max() {
        check_max_n(n as u64, max_n)?;
    }
    let reports = run_all(&grid)?;
    let inputs = value(&grid);
    let mut text = String::new();
    let mut failed = Vec::new();
    for report in &reports {
        if !report.passed() {
            failed.push(report.check_name.clone());
        }
        let mut record = OutputRecord::new("verify", inputs.clone(), value(report));
        if !report.skipped.is_empty() {
            record
                .warnings
                .push(format!("{} cases skipped", report.skipped.len()));
        }
        text.push_str(&json_text(&record));
    }
    let failure = (!failed.is_empty())
        .then(|| Failure::Checks(format!("failing checks: {}", failed.join(", "))));
    Ok(Rendered { text, failure })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Capacity(_) => "capacity",
        Command::UsesNeeded(_) => "uses-needed",
        Command::Spectrum(_) => "spectrum",
        Command::Verify(_) => "verify",
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

fn append_log(path: &PathBuf, command: &str, code: i32) {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let line = format!("unix_time={secs} command={command} exit={code}\n");
    let written = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| f.write_all(line.as_bytes()));
    if let Err(e) = written {
        eprintln!("warning: cannot write log {}: {e}", path.display());
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    let result = match &cli.command {
        Command::Capacity(a) => cmd_capacity(a, cli.max_n),
        Command::UsesNeeded(a) => cmd_uses_needed(a),
        Command::Spectrum(a) => cmd_spectrum(a, cli.max_n),
        Command::Verify(a) => cmd_verify(a, cli.max_n),
    };
    let code = match result.and_then(|r| emit(&r.text, cli.output.as_ref()).map(|_| r.failure)) {
        Ok(None) => EXIT_OK,
        Ok(Some(failure)) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            let record = ErrorRecord::new(name, failure.kind(), failure.message());
            let mut line = to_json_line(&record).expect("error records serialize");
            line.push('\n');
            let _ = emit(&line, cli.output.as_ref());
            failure.exit_code()
        }
    };
    if let Some(path) = &cli.log {
        append_log(path, name, code);
    }
    code
}
