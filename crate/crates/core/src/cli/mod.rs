//! Command-line runner: `qbe run <file>`, `qbe scenario <name>`,
//! `qbe list-scenarios`.

pub mod config;
pub mod report;
pub mod scenarios;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::error::QbeError;
use config::{ConfigError, RunConfig, Scenario};
use report::Report;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

const DEFAULT_OUT: &str = "qbe-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    UnknownScenario(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid sweep `{0}`: expected key=v1,v2,...")]
    Sweep(String),

    #[error(transparent)]
    Model(#[from] QbeError),
}

#[derive(Debug, Parser)]
#[command(
    name = "qbe",
    version,
    about = "Quantum Brownian master equation experiments"
)]
struct Cli {
    /// Output directory (default: output.dir from the config, then $QBE_OUT, then ./qbe-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run once per value into `<out>/<key>=<value>/`, concurrently.
    #[arg(long, global = true, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        file: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a preset scenario.
    Scenario {
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the preset names, one per line.
    ListScenarios,
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qbe: error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (source, overrides) = match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{s}");
            }
            return Ok(EXIT_PASS);
        }
        Command::Run { file, overrides } => {
            let src = std::fs::read_to_string(&file).map_err(|source| CliError::Read {
                path: file.clone(),
                source,
            })?;
            (src, overrides)
        }
        Command::Scenario { name, overrides } => {
            let s: Scenario = name.parse().map_err(CliError::UnknownScenario)?;
            (s.preset().to_string(), overrides)
        }
    };
    match cli.sweep {
        None => {
            let cfg = RunConfig::parse(&source, &overrides)?;
            let dir = output_dir(cli.out.as_deref(), &cfg);
            run_one(&cfg, &dir)
        }
        Some(sweep) => {
            let (key, values) = parse_sweep(&sweep)?;
            let configs = values
                .iter()
                .map(|v| {
                    let mut o = overrides.clone();
                    o.push(format!("{key}={v}"));
                    RunConfig::parse(&source, &o)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let root = output_dir(cli.out.as_deref(), &configs[0]);
            let results: Vec<Result<i32, CliError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = configs
                    .iter()
                    .zip(&values)
                    .map(|(cfg, v)| {
                        let dir = root.join(format!("{key}={v}"));
                        scope.spawn(move || run_one(cfg, &dir))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                    .collect()
            });
            let mut code = EXIT_PASS;
            for r in results {
                match r {
                    Ok(c) => code = code.max(c),
                    Err(e) => {
                        eprintln!("qbe: error: {e}");
                        code = EXIT_USAGE;
                    }
                }
            }
            Ok(code)
        }
    }
}

fn parse_sweep(s: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| CliError::Sweep(s.to_string()))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if key.trim().is_empty() || values.iter().any(String::is_empty) {
        return Err(CliError::Sweep(s.to_string()));
    }
    Ok((key.trim().to_string(), values))
}

fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .or_else(|| std::env::var_os("QBE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Runs one configuration, writes its files and reports the exit code.
pub fn run_one(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let report = scenarios::run_scenario(cfg)?;
    write_report(&report, dir)?;
    println!(
        "{}: {} ({})",
        cfg.scenario,
        if report.passed() { "PASS" } else { "FAIL" },
        dir.display()
    );
    Ok(if report.passed() {
        EXIT_PASS
    } else {
        EXIT_ASSERTION
    })
}

fn write_report(report: &Report, dir: &Path) -> Result<(), CliError> {
    report.write(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}
