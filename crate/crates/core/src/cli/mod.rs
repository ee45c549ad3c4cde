//! Command-line front end. `run` returns the process exit code:
//! `0` success, `1` a check failed or a run did not converge, `2` bad input.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use config::{GradMethod, RunConfig};
use output::{sha256_hex, Artifacts, Manifest};

#[derive(Debug, Parser)]
#[command(
    name = "mildhjb",
    version,
    about = "Mild solutions of elliptic HJB equations on truncated Hilbert spaces"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Top-level seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "MILDHJB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the standing assumptions of a model and report the contraction constants.
    Certify,
    /// Evaluate the transition semigroup on a test function.
    Semigroup,
    /// G-directional derivative of the semigroup, exactly or by Monte Carlo.
    Grad {
        #[arg(long, value_enum)]
        method: Option<GradMethod>,
    },
    /// Picard iteration for the mild solution.
    Solve,
    /// Simulate the Ornstein-Uhlenbeck paths.
    Simulate,
    /// Boundary-control heat equation, end to end against a DP oracle.
    NeumannDemo,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Semigroup => "semigroup",
            Self::Grad { .. } => "grad",
            Self::Solve => "solve",
            Self::Simulate => "simulate",
            Self::NeumannDemo => "neumann-demo",
        }
    }

    fn needs_model(&self) -> bool {
        !matches!(self, Self::NeumannDemo)
    }
}

/// Failure carrying its exit code and a stage label for the error report.
struct Failure {
    code: i32,
    stage: &'static str,
    error: Error,
}

fn config_error(error: Error) -> Failure {
    Failure {
        code: 2,
        stage: "config",
        error,
    }
}

fn runtime_error(error: Error) -> Failure {
    let code = if matches!(error, Error::InvalidInput(_)) { 2 } else { 1 };
    Failure {
        code,
        stage: "run",
        error,
    }
}

fn load_config(cli: &Cli) -> Result<(RunConfig, Vec<u8>, PathBuf), Failure> {
    match &cli.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| config_error(e.into()))?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| config_error(Error::InvalidInput(format!("config is not UTF-8: {e}"))))?;
            let cfg = RunConfig::from_json(text).map_err(config_error)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, bytes, base))
        }
        None if !cli.command.needs_model() => Ok((RunConfig::default(), b"{}".to_vec(), PathBuf::new())),
        None => Err(config_error(Error::InvalidInput(format!(
            "'{}' needs --config",
            cli.command.name()
        )))),
    }
}

fn execute(cli: &Cli, started: Instant) -> Result<i32, Failure> {
    let (cfg, raw, base) = load_config(cli)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let model = if cli.command.needs_model() {
        Some(cfg.resolve_model(&base).map_err(config_error)?)
    } else {
        None
    };
    let mut out = Artifacts::new(&cli.out).map_err(runtime_error)?;
    let model_ref = model.as_ref();
    let outcome = match &cli.command {
        Command::Certify => commands::cmd_certify(&cfg, model_ref.expect("model"), &mut out),
        Command::Semigroup => commands::cmd_semigroup(&cfg, model_ref.expect("model"), &mut out),
        Command::Grad { method } => commands::cmd_grad(&cfg, model_ref.expect("model"), *method, seed, &mut out),
        Command::Solve => commands::cmd_solve(&cfg, model_ref.expect("model"), &mut out),
        Command::Simulate => commands::cmd_simulate(&cfg, model_ref.expect("model"), seed, &mut out),
        Command::NeumannDemo => commands::cmd_neumann_demo(&cfg, seed, &mut out),
    }
    .map_err(runtime_error)?;
    let code = if outcome.pass { 0 } else { 1 };
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        config_sha256: sha256_hex(&raw),
        seed,
        derived_seeds: outcome.derived_seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
        outputs: out.written().to_vec(),
    };
    out.json("manifest.json", &manifest).map_err(runtime_error)?;
    Ok(code)
}

fn report_failure(cli: &Cli, f: &Failure) {
    let body = json!({ "error": { "stage": f.stage, "exit_code": f.code, "message": f.error.to_string() } });
    eprintln!("{body}");
    if std::fs::create_dir_all(&cli.out).is_ok() {
        let _ = std::fs::write(cli.out.join("error.json"), format!("{body:#}\n"));
    }
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let started = Instant::now();
    let go = || match execute(cli, started) {
        Ok(code) => code,
        Err(f) => {
            report_failure(cli, &f);
            f.code
        }
    };
    match cli.threads {
        Some(0) => {
            report_failure(cli, &config_error(Error::InvalidInput("--threads must be >= 1".into())));
            2
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => {
                report_failure(cli, &runtime_error(Error::InvalidInput(format!("thread pool: {e}"))));
                2
            }
        },
        None => go(),
    }
}

/// Parses `args` (including the program name) and runs; clap usage errors exit with 2.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
