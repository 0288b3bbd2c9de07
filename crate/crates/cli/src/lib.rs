//! `cascade-lab`: exact spectral constants and Monte Carlo experiments for
//! random multiplicative cascades.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on invalid input (with an
//! error JSON on stdout), 3 when a check fails against its oracle.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::Params;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cascade-lab", version, about = "Random multiplicative cascades on the dyadic tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// D_F, ϱ, ϖ, the Hölder exponents and related rates of a law.
    Dims(Params),
    /// μ̂_n(s) for s = 0..=s_max of one realization.
    Spectrum(Params),
    /// E|μ̂_n(s)|^2 by Monte Carlo against the exact finite-depth value.
    Moments(Params),
    /// E[μ̂_n(1)^2] by Monte Carlo against ϖ.
    Varpi(Params),
    /// Covariance of the rescaled coefficient at frequency 2^n.
    Clt(Params),
    /// The additive martingale M2_n and the growth of sup Y.
    M2(Params),
    /// Extremes of the leaf masses across depths and the fitted exponents.
    Frostman(Params),
    /// Decay rate of E|μ̂(2^j)|^2 in j.
    Fdim(Params),
    /// Monotonicity of K_V(p) = ln E[Σ V_i^p] / p on [1, 2].
    Entropy(Params),
    /// The distribution function F_n and its inverse.
    Homeo(Params),
    /// The acceptance suite.
    Selftest {
        /// quick | full
        #[arg(default_value = "quick")]
        profile: String,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(cascade_core::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<cascade_core::Error> for CliError {
    fn from(e: cascade_core::Error) -> Self {
        match e {
            cascade_core::Error::Io(m) => CliError::Io(m),
            e => CliError::Core(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        use cascade_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::DegenerateLaw => "degenerate_law",
                E::InvalidLaw(_) => "invalid_law",
                E::QuadratureFailure(_) => "quadrature_failure",
                E::DepthExceeded { .. } => "depth_exceeded",
                E::DomainError(_) => "domain_error",
                E::ParameterError(_) => "parameter_error",
                E::DimensionError(_) => "dimension_error",
                E::ConsistencyError(_) => "consistency_error",
                E::Io(_) => "io",
            },
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            _ => EXIT_USAGE,
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn print_stdout(text: &str) -> std::io::Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e),
        _ => Ok(()),
    }
}

fn report_error(e: &CliError) -> i32 {
    let _ = print_stdout(&json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string());
    e.exit_code()
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            return report_error(&CliError::Usage(e.to_string().trim().to_string()));
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    let (name, params, profile) = match command {
        Command::Dims(p) => ("dims", p, None),
        Command::Spectrum(p) => ("spectrum", p, None),
        Command::Moments(p) => ("moments", p, None),
        Command::Varpi(p) => ("varpi", p, None),
        Command::Clt(p) => ("clt", p, None),
        Command::M2(p) => ("m2", p, None),
        Command::Frostman(p) => ("frostman", p, None),
        Command::Fdim(p) => ("fdim", p, None),
        Command::Entropy(p) => ("entropy", p, None),
        Command::Homeo(p) => ("homeo", p, None),
        Command::Selftest { profile, params } => ("selftest", params, Some(profile)),
    };
    let mut params = params.resolve()?;
    if let Some(threads) = params.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if the pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let outcome = commands::execute(name, &mut params, profile)?;
    let document = json!({ "command": name, "config": params, "result": outcome.result });
    let text = serde_json::to_string_pretty(&document).expect("values serialize");
    match &params.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => print_stdout(&text)?,
    }
    Ok(if outcome.passed { EXIT_OK } else { EXIT_MISMATCH })
}
