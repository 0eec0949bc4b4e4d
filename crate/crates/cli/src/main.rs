//! Batch driver: one task per invocation, artifacts plus `manifest.json`.

mod config;
mod output;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};
use thiserror::Error;

use config::{RunConfig, Task};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "nhband", version, about = "Spectra, aGBZ and self-intersections of 1D non-Hermitian chains")]
struct Args {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: fig2b, fig2c, fig2d or fig3.
    #[arg(long)]
    preset: Option<String>,
    /// Replaces the configured task.
    #[arg(long)]
    task: Option<Task>,
    /// Output directory (created if missing); overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Tolerance override `tolE=VAL` or `tieTol=VAL`; repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VAL")]
    tol_override: Vec<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(CliError::Config("either --config or --preset is required".into())),
    };
    if let Some(task) = args.task {
        config.task = task;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    for spec in &args.tol_override {
        config.apply_override(spec)?;
    }
    config.validate()?;
    Ok(config)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run(args: &Args) -> Result<(), CliError> {
    let config = load(args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let start = Instant::now();
    let result = config.model.build().and_then(|model| tasks::run_task(&config, &model));
    let mut manifest = json!({
        "schemaVersion": config::SCHEMA_VERSION,
        "version": nhband::VERSION,
        "config": config,
    });
    let outcome = match result {
        Ok(out) => {
            for (name, bytes) in &out.files {
                write(&dir, name, bytes)?;
            }
            let names: Vec<&str> = out.files.iter().map(|f| f.0.as_str()).collect();
            manifest["outputs"] = json!(names);
            manifest["summary"] = out.summary;
            manifest["warnings"] = Value::Array(out.warnings);
            manifest["status"] = json!(if out.failure.is_some() { "fail" } else { "ok" });
            match out.failure {
                Some(msg) => Err(CliError::Numerical(msg)),
                None => Ok(()),
            }
        }
        Err(e) => {
            manifest["warnings"] = json!([]);
            manifest["status"] = json!("error");
            Err(e)
        }
    };
    if let Err(e) = &outcome {
        manifest["error"] = json!({ "exitCode": e.exit_code(), "message": e.to_string() });
    }
    manifest["wallTimeSeconds"] = json!(start.elapsed().as_secs_f64());
    write(&dir, "manifest.json", &output::json(&manifest))?;
    outcome
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nhband: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
