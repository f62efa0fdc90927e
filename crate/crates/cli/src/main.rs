//! `kovtop` command-line front end.
//!
//! Data goes to `--out` (or stdout); a JSON run manifest goes next to it as
//! `<out>.manifest.json` (or to stderr). Exit codes: 0 success, 1 validation
//! or suite failure, 2 usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use output::{json_text, Format, Payload};

#[derive(Debug, Parser, Serialize)]
#[command(name = "kovtop", version, about = "Rigid body with Kovalevskaya inertia ratios in two constant fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Integrate the Euler–Poisson equations and tabulate integrals and residuals
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Run the seeded invariant suites (always JSON)
    #[command(allow_negative_numbers = true)]
    Check(CheckArgs),
    /// Compare s1(t), s2(t) from the full flow and from the separated system
    #[command(allow_negative_numbers = true)]
    Crosscheck(CrosscheckArgs),
    /// Classify a grid of (m, l) against the separating set
    #[command(allow_negative_numbers = true)]
    Bifurcation(BifurcationArgs),
    /// Closed-form and ODE-measured period of one separated coordinate (always JSON)
    #[command(allow_negative_numbers = true)]
    Period(PeriodArgs),
    /// Derived body constants, separating lines and optional level data (always JSON)
    #[command(allow_negative_numbers = true)]
    Params(ParamsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Magnitude of the first field
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Magnitude of the second field
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s {
        "1" | "+1" | "+" => Ok(1),
        "-1" | "-" => Ok(-1),
        other => Err(format!("expected +1 or -1, got '{other}'")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LevelArgs {
    /// Value of the integral M
    #[arg(long)]
    pub m: Option<f64>,
    /// Value of the integral L
    #[arg(long)]
    pub l: Option<f64>,
    /// Separated coordinate s1 (default: middle of its interval)
    #[arg(long)]
    pub s1: Option<f64>,
    /// Separated coordinate s2 (default: middle of its interval)
    #[arg(long)]
    pub s2: Option<f64>,
    #[arg(long, value_parser = parse_sign, default_value = "1", allow_hyphen_values = true)]
    pub eps1: i8,
    #[arg(long, value_parser = parse_sign, default_value = "1", allow_hyphen_values = true)]
    pub eps2: i8,
    #[arg(long, value_parser = parse_sign, default_value = "1", allow_hyphen_values = true)]
    pub sig1: i8,
    #[arg(long, value_parser = parse_sign, default_value = "1", allow_hyphen_values = true)]
    pub sig2: i8,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TolArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Initial angular velocity "w1,w2,w3" (with --alpha/--beta instead of a level)
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub omega: Option<Vec<f64>>,
    /// Raw first field vector "x,y,z"; fields are normalized to orthogonal form
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub alpha: Option<Vec<f64>>,
    /// Raw second field vector "x,y,z"
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n_samples: usize,
    /// Level samples used by the crosscheck suite
    #[arg(long, default_value_t = 3)]
    pub n_crosscheck: usize,
    /// Test hook: inject a sign error into F2
    #[arg(long, value_parser = ["overall", "first-inner", "middle", "second-inner"], hide = true)]
    pub inject_f2: Option<String>,
    /// Test hook: inject a sign error into the reconstruction radicals
    #[arg(
        long,
        value_parser = ["field-s1", "field-s2", "phi-s1", "phi-s2", "phi-phi", "field-field", "field-s2-phi-s1", "field-s1-phi-s2"],
        hide = true
    )]
    pub inject_radical: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrosscheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Span in s2 periods (ignored when --t-end is given)
    #[arg(long, default_value_t = 3.0)]
    pub periods: f64,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Sample spacing (default: 1/200 of the s2 period)
    #[arg(long)]
    pub dt: Option<f64>,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BifurcationArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = -3.0)]
    pub m_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub m_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub l_max: f64,
    /// Points per axis (both ends included)
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    S1,
    S2,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PeriodArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub level: LevelArgs,
    #[arg(long, value_enum, default_value_t = Which::S1)]
    pub which: Which,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Optional level whose intervals and classification are reported
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    /// Raw first field vector "x,y,z"; overrides --a/--b after normalization
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
}

/// Result of a command before it is written out.
pub struct Outcome {
    pub payload: Option<Payload>,
    pub summary: Value,
    /// `Some` on validation or suite failure (exit 1).
    pub failure: Option<String>,
}

pub enum CmdError {
    Usage(String),
    Failed(String),
}

impl From<kovtop::Error> for CmdError {
    fn from(e: kovtop::Error) -> Self {
        CmdError::Failed(e.to_string())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: &'a Command,
    seed: Option<u64>,
    library_version: &'static str,
    cli_version: &'static str,
    duration_s: f64,
    outputs: Vec<String>,
    exit_code: u8,
    error: Option<String>,
    summary: Value,
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Simulate(a) => &a.common,
        Command::Check(a) => &a.common,
        Command::Crosscheck(a) => &a.common,
        Command::Bifurcation(a) => &a.common,
        Command::Period(a) => &a.common,
        Command::Params(a) => &a.common,
    }
}

fn name_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate(_) => "simulate",
        Command::Check(_) => "check",
        Command::Crosscheck(_) => "crosscheck",
        Command::Bifurcation(_) => "bifurcation",
        Command::Period(_) => "period",
        Command::Params(_) => "params",
    }
}

fn write_or_print(path: Option<&PathBuf>, text: &str, to_stderr: bool) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None if to_stderr => {
            eprint!("{text}");
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Check(a) => commands::check(a),
        Command::Crosscheck(a) => commands::crosscheck(a),
        Command::Bifurcation(a) => commands::bifurcation(a),
        Command::Period(a) => commands::period(a),
        Command::Params(a) => commands::params(a),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            return ExitCode::from(2);
        }
        Err(CmdError::Failed(msg)) => Outcome { payload: None, summary: Value::Null, failure: Some(msg) },
    };

    let common = common_of(&cli.command);
    let mut outputs = Vec::new();
    let mut io_error = None;
    if let Some(payload) = &outcome.payload {
        let text = payload.render(common.format);
        if let Err(e) = write_or_print(common.out.as_ref(), &text, false) {
            io_error = Some(format!("writing output: {e}"));
        } else if let Some(p) = &common.out {
            outputs.push(p.display().to_string());
        }
    }
    let manifest_path = common.out.as_ref().map(|p| {
        let mut s = p.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    });
    if let Some(p) = &manifest_path {
        outputs.push(p.display().to_string());
    }
    let error = outcome.failure.clone().or(io_error);
    let exit_code = u8::from(error.is_some());
    let manifest = Manifest {
        command: name_of(&cli.command),
        args: &cli.command,
        seed: match &cli.command {
            Command::Check(a) => Some(a.seed),
            _ => None,
        },
        library_version: kovtop::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        duration_s: start.elapsed().as_secs_f64(),
        outputs,
        exit_code,
        error: error.clone(),
        summary: outcome.summary,
    };
    let text = json_text(&serde_json::to_value(&manifest).expect("serializable manifest"));
    if let Err(e) = write_or_print(manifest_path.as_ref(), &text, true) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    if let Some(msg) = error {
        eprintln!("error: {msg}");
    }
    ExitCode::from(exit_code)
}
