//! `tppp`: sweeps, simulations and contours for vehicular network models.
//!
//! Every subcommand reads one JSON configuration, writes CSV or JSON files
//! into the output directory and a `<command>.manifest.json` next to them.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical
//! non-convergence (outputs still written and flagged in the manifest),
//! 1 for I/O failures and replay mismatches.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tppp::Execution;

use commands::Run;
use config::{ContourConfig, MaxgapConfig, MetadistConfig, SimulateConfig, SuccessConfig};
use output::{Manifest, Outputs, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] tppp::Error),
    #[error("replayed outputs differ: {0:?}")]
    ReplayMismatch(Vec<String>),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Json(_) | CliError::Read { .. } => "config",
            CliError::Model(tppp::Error::Numerics(_)) => "numerics",
            CliError::Model(_) => "config",
            CliError::Write { .. } | CliError::Csv(_) => "io",
            CliError::ReplayMismatch(_) => "replay_mismatch",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "config" => 2,
            "numerics" => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tppp", version, about = "Vehicular network SIR meta distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed of all random streams.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, env = "TPPP_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success probabilities over a θ grid.
    Success { config: PathBuf },
    /// Meta distributions by exact inversion, beta fit or simulation.
    Metadist { config: PathBuf },
    /// Empirical meta distributions, success probabilities and distances.
    Simulate { config: PathBuf },
    /// Transmit-probability contours for a reliability target.
    Contour { config: PathBuf },
    /// Largest success-probability gap between the PLP-PPP and the TPPP.
    Maxgap { config: PathBuf },
    /// Re-runs a manifest and checks that outputs are identical.
    Replay { manifest: PathBuf },
}

/// A parsed configuration, ready to run.
#[derive(Debug, Clone)]
enum Job {
    Success(SuccessConfig),
    Metadist(MetadistConfig),
    Simulate(SimulateConfig),
    Contour(ContourConfig),
    Maxgap(MaxgapConfig),
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs serialize")
}

impl Job {
    fn parse(command: &str, config: Value) -> Result<Self, CliError> {
        Ok(match command {
            "success" => Job::Success(parse(config)?),
            "metadist" => Job::Metadist(parse(config)?),
            "simulate" => Job::Simulate(parse(config)?),
            "contour" => Job::Contour(parse(config)?),
            "maxgap" => Job::Maxgap(parse(config)?),
            other => return Err(CliError::Config(format!("unknown command {other:?}"))),
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Job::Success(_) => "success",
            Job::Metadist(_) => "metadist",
            Job::Simulate(_) => "simulate",
            Job::Contour(_) => "contour",
            Job::Maxgap(_) => "maxgap",
        }
    }

    fn resolved_config(&self) -> Value {
        match self {
            Job::Success(c) => to_value(c),
            Job::Metadist(c) => to_value(c),
            Job::Simulate(c) => to_value(c),
            Job::Contour(c) => to_value(c),
            Job::Maxgap(c) => to_value(c),
        }
    }

    fn execute(&self, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
        match self {
            Job::Success(c) => commands::success(c, run, out),
            Job::Metadist(c) => commands::metadist(c, run, out),
            Job::Simulate(c) => commands::simulate(c, run, out),
            Job::Contour(c) => commands::contour(c, run, out),
            Job::Maxgap(c) => commands::maxgap(c, run, out),
        }
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs a job and writes its manifest. Convergence failures yield a
/// manifest with status `partial`.
fn run_job(job: &Job, seed: u64, threads: Option<usize>, dir: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut out = Outputs::new(dir)?;
    let run = Run::new(seed, Execution::Parallel);
    let summary = job.execute(&run, &mut out)?;
    let mut partial_errors = run.into_partial();
    partial_errors.sort_by(|a, b| a.context.cmp(&b.context));
    let manifest = Manifest {
        command: job.name().to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: job.resolved_config(),
        seed,
        threads,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        status: if partial_errors.is_empty() { Status::Ok } else { Status::Partial },
        outputs: out.into_files(),
        partial_errors,
        summary,
    };
    let path = manifest.write(dir)?;
    log::info!("wrote {}", path.display());
    Ok(manifest)
}

fn replay(path: &Path, threads: Option<usize>, dir: &Path) -> Result<Value, CliError> {
    let recorded = Manifest::read(path)?;
    let job = Job::parse(&recorded.command, recorded.config.clone())?;
    let fresh = run_job(&job, recorded.seed, threads, dir)?;
    let mut mismatched = Vec::new();
    let files: Vec<Value> = recorded
        .outputs
        .iter()
        .map(|o| {
            let actual = fresh.outputs.iter().find(|f| f.file == o.file).map(|f| f.sha256.clone());
            let same = actual.as_deref() == Some(o.sha256.as_str());
            if !same {
                mismatched.push(o.file.clone());
            }
            json!({ "file": o.file, "expected": o.sha256, "actual": actual, "identical": same })
        })
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::ReplayMismatch(mismatched));
    }
    Ok(json!({ "manifest": path, "files": files, "identical": true }))
}

fn error_report(e: &CliError) -> Value {
    json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
            "exit_code": e.exit_code(),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            let e = CliError::Config("--threads must be at least 1".into());
            eprintln!("{}", error_report(&e));
            return ExitCode::from(e.exit_code());
        }
        tppp::exec::configure_threads(n);
    }

    let result = match &cli.command {
        Command::Replay { manifest } => replay(manifest, cli.threads, &cli.out).map(|report| {
            println!("{report}");
            None
        }),
        Command::Success { config }
        | Command::Metadist { config }
        | Command::Simulate { config }
        | Command::Contour { config }
        | Command::Maxgap { config } => {
            let name = match cli.command {
                Command::Success { .. } => "success",
                Command::Metadist { .. } => "metadist",
                Command::Simulate { .. } => "simulate",
                Command::Contour { .. } => "contour",
                _ => "maxgap",
            };
            read_json(config)
                .and_then(|v| Job::parse(name, v))
                .and_then(|job| run_job(&job, cli.seed, cli.threads, &cli.out))
                .map(Some)
        }
    };
    match result {
        Ok(Some(m)) if m.status == Status::Partial => {
            let report = json!({
                "error": {
                    "kind": "numerics",
                    "message": format!("{} value(s) did not converge; see manifest", m.partial_errors.len()),
                    "exit_code": 3,
                }
            });
            eprintln!("{report}");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_report(&e));
            ExitCode::from(e.exit_code())
        }
    }
}
