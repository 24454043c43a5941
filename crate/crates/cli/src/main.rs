//! `rwre-lab`: runs named experiments from JSON configs.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
//! input is rejected or the run cannot complete. Errors are reported as JSON
//! on stdout.

mod config;
mod experiments;
mod output;
mod query;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::ConfigError;
use experiments::RunError;

#[derive(Parser)]
#[command(name = "rwre-lab", version, about = "Random walk in random environment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, summary.json and plot.dat.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Validate a model and print its analytic bounds.
    Bounds {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Answer an exact oracle query.
    Oracle {
        #[arg(long)]
        query: PathBuf,
    },
}

fn error_report(kind: &str, message: &str, details: &Value) -> ExitCode {
    let mut report = json!({ "error": kind, "message": message });
    if !details.is_null() {
        report["details"] = details.clone();
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    ExitCode::from(2)
}

fn config_failure(e: ConfigError) -> ExitCode {
    error_report("config", &e.message, &e.details)
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("RWRE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| ConfigError::new(format!("RWRE_THREADS = {v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| ConfigError::new(e.to_string()))
}

fn run(config_path: &Path, output_dir: Option<PathBuf>) -> ExitCode {
    let cfg = match read(config_path).and_then(|t| config::parse(&t)).and_then(|c| c.resolve()) {
        Ok(mut c) => {
            if output_dir.is_some() {
                c.output_dir = output_dir;
            }
            c
        }
        Err(e) => return config_failure(e),
    };
    let outcome = match experiments::run_experiment(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return config_failure(e),
        Err(RunError::Runtime(m)) => return error_report("runtime", &m, &Value::Null),
    };
    let dir = cfg.output_dir();
    let echoed = serde_json::to_value(&cfg).unwrap();
    if let Err(e) = output::write_artifacts(&dir, &echoed, &outcome) {
        return error_report("io", &format!("writing {}: {e}", dir.display()), &Value::Null);
    }
    println!("{} -> {}", cfg.experiment.name(), dir.display());
    if outcome.checks.is_empty() {
        println!("no checks apply to this configuration");
    }
    for c in &outcome.checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn answer(path: &Path, f: fn(&str) -> Result<Value, ConfigError>) -> ExitCode {
    match read(path).and_then(|t| f(&t)) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => config_failure(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return config_failure(e);
    }
    match cli.command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Bounds { spec } => answer(&spec, query::bounds),
        Command::Oracle { query } => answer(&query, query::oracle),
    }
}
