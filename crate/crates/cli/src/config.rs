//! Run parameters from flags and an optional JSON config file.
//!
//! Every subcommand takes the same parameter set. Flags override the config
//! file; a command fills in defaults for the parameters it uses, and the
//! result is echoed in its output, so the echo is itself a config that
//! reproduces the run.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Seed used when neither `--seed`, the config nor the environment sets one.
pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "CASCADE_LAB_SEED";

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// JSON file with any of these parameters; flags take precedence.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// uniform | beta:<α> | twopoint:<a> | discrete:@file.csv | density:@file.csv
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,

    /// Quadrature tolerance for laws without closed-form moments.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    /// Cascade depth.
    #[arg(short = 'n', long = "depth")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,

    /// Inner depth below the dyadic level (clt, fdim).
    #[arg(short = 'k', long = "inner-depth")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,

    /// Number of Monte Carlo replicas.
    #[arg(short = 'R', long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,

    /// Master seed [default: $CASCADE_LAB_SEED or 0].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Replica index for single-realization commands (spectrum, homeo).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<u64>,

    /// Frequency (moments).
    #[arg(short = 's', long = "freq")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,

    /// Largest frequency (spectrum).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<u64>,

    /// Threshold for the small-M2 fraction (m2).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,

    /// Comma-separated depths (frostman).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u32>>,

    /// Comma-separated dyadic levels j, frequencies 2^j (fdim).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,

    /// check | battery | search (entropy).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,

    /// Simplex dimension (entropy search).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,

    /// Objective evaluations (entropy search).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,

    /// Number of random laws (entropy battery).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,

    /// Points t at which to evaluate F_n (homeo).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,

    /// Values y at which to invert F_n (homeo).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,

    /// Exit with status 3 when any reported |z| exceeds this.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_threshold: Option<f64>,

    /// Write per-replica or per-point values to this CSV file.
    #[arg(long, value_name = "FILE")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,

    /// Write the JSON summary here instead of stdout.
    #[arg(long, value_name = "FILE")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Worker threads [default: available parallelism].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Params {
    /// Fields set here win over those in `base`.
    fn over(self, base: Params) -> Params {
        Params {
            config: self.config,
            law: self.law.or(base.law),
            tol: self.tol.or(base.tol),
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            replicas: self.replicas.or(base.replicas),
            seed: self.seed.or(base.seed),
            replica: self.replica.or(base.replica),
            s: self.s.or(base.s),
            s_max: self.s_max.or(base.s_max),
            eps: self.eps.or(base.eps),
            depths: self.depths.or(base.depths),
            levels: self.levels.or(base.levels),
            mode: self.mode.or(base.mode),
            dim: self.dim.or(base.dim),
            budget: self.budget.or(base.budget),
            count: self.count.or(base.count),
            t: self.t.or(base.t),
            y: self.y.or(base.y),
            z_threshold: self.z_threshold.or(base.z_threshold),
            csv: self.csv.or(base.csv),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
        }
    }

    /// Applies the config file under the flags and resolves the seed.
    pub fn resolve(self) -> Result<Params, CliError> {
        let base = match &self.config {
            Some(path) => load(path)?,
            None => Params::default(),
        };
        let mut p = self.over(base);
        if p.seed.is_none() {
            p.seed = Some(match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => DEFAULT_SEED,
            });
        }
        Ok(p)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

fn load(path: &Path) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// `value` if set, otherwise `default`, recorded back into `slot` for the echo.
pub fn take<T: Clone>(slot: &mut Option<T>, default: T) -> T {
    slot.get_or_insert(default).clone()
}
