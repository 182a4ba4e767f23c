//! `splittree`: run split-tree experiments and renewal computations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime fault.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RawConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "splittree", version, about = "Random split tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the family presets with their constants.
    Families,
    /// Build trees over the size grid; write per-replication CSV and summary JSON.
    Simulate(Common),
    /// Solve the split renewal equation for the configured family.
    Renewal {
        #[command(flatten)]
        common: Common,
        /// Write U(t) as `t,value` rows.
        #[arg(long)]
        dump_u: Option<PathBuf>,
        /// Write e^-t U(t) as `t,value` rows.
        #[arg(long)]
        dump_u_hat: Option<PathBuf>,
        /// Write W(x) as `t,value` rows.
        #[arg(long)]
        dump_w: Option<PathBuf>,
    },
    /// Count heavy vertices of the weighted branching process.
    Heavy(Common),
    /// Recompute summaries from a replication CSV.
    Report {
        /// CSV written by `simulate`.
        #[arg(long)]
        csv: PathBuf,
        /// Summary destination; stdout when absent.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

/// Settings shared by the experiment subcommands; each flag overrides the
/// config-file key of the same name.
#[derive(Args, Debug, Default)]
struct Common {
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    family_params: Option<String>,
    /// Comma-separated sizes, e.g. `1000,1e4`.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    base_seed: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// counts, traced or instrumented.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out_csv: Option<String>,
    #[arg(long)]
    out_json: Option<String>,
    #[arg(long = "renewal-h")]
    renewal_h: Option<String>,
    #[arg(long = "renewal-t-max")]
    renewal_t_max: Option<String>,
    #[arg(long = "heavy-k")]
    heavy_k: Option<String>,
    #[arg(long = "heavy-runs")]
    heavy_runs: Option<String>,
    /// Concurrent replications; all cores when absent.
    #[arg(long, env = "SPLITTREE_WORKERS")]
    workers: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<(config::ExperimentConfig, Option<usize>), CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::read(path)?,
            None => RawConfig::default(),
        };
        let flags = [
            ("family", &self.family),
            ("family_params", &self.family_params),
            ("n_grid", &self.n_grid),
            ("replications", &self.replications),
            ("base_seed", &self.base_seed),
            ("epsilon", &self.epsilon),
            ("beta", &self.beta),
            ("mode", &self.mode),
            ("out_csv", &self.out_csv),
            ("out_json", &self.out_json),
            ("renewal.h", &self.renewal_h),
            ("renewal.t_max", &self.renewal_t_max),
            ("heavy.K", &self.heavy_k),
            ("heavy.runs", &self.heavy_runs),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v).map_err(CliError::Config)?;
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok((raw.resolve()?, self.workers))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Families => commands::families(),
        Command::Simulate(common) => {
            let (cfg, workers) = common.resolve()?;
            commands::simulate(&cfg, workers)
        }
        Command::Renewal { common, dump_u, dump_u_hat, dump_w } => {
            let (cfg, _) = common.resolve()?;
            commands::renewal(&cfg, commands::Dumps { u: dump_u, u_hat: dump_u_hat, w: dump_w })
        }
        Command::Heavy(common) => {
            let (cfg, workers) = common.resolve()?;
            commands::heavy(&cfg, workers)
        }
        Command::Report { csv, out_json } => commands::report(&csv, out_json.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splittree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
