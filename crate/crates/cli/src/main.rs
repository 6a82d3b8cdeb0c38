//! `lfd`: run the learning, reproduction, teaching and compliance
//! scenarios and export plot data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nullspace_lfd::scenarios::run::TRACE_DIR;
use nullspace_lfd::scenarios::{export_plots, run_to_dir, MetricsReport, ScenarioConfig, ScenarioKind};
use nullspace_lfd::Error;

#[derive(Parser)]
#[command(name = "lfd", version, about = "Learning from demonstration with null-space control, in simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a skill (diffeomorphism and gain matrix) to a demonstration.
    Learn(RunArgs),
    /// Reproduce a skill on the simulated arm.
    Reproduce(RunArgs),
    /// Teach with a simulated hand: L-shape isotropy and singularity pull.
    Teach(RunArgs),
    /// Circle tracking with elbow pushes, compliant vs rigid null space.
    Comply(RunArgs),
    /// Turn a run's traces into per-figure plot data files.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (batch mode: parent of the per-config directories).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run several configurations concurrently, each into its own
    /// directory named after the file.
    #[arg(long, num_args = 1.., conflicts_with = "config")]
    batch: Vec<PathBuf>,
    /// Default output root when neither --out nor the config sets one.
    #[arg(long, env = "LFD_OUTPUT_ROOT", default_value = "runs")]
    output_root: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Run directory (or its trace/ subdirectory).
    #[arg(long)]
    trace: PathBuf,
    /// Destination of the figure files; defaults to <run>/plots.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status per error class.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse(_) | Error::Io(_) => 2,
        Error::DegenerateDemo(_) => 3,
        Error::NoConvergence { .. } => 4,
        Error::Singularity(_) | Error::InstabilityAbort { .. } => 5,
    }
}

const CHECKS_FAILED: u8 = 1;

fn load_config(kind: ScenarioKind, path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig, Error> {
    let mut config = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::new(kind),
    };
    if config.kind != kind {
        return Err(Error::InvalidInput(format!(
            "configuration is for `{}`, not `{}`",
            config.kind.name(),
            kind.name()
        )));
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn number(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn summarize(label: &str, dir: &Path, report: &MetricsReport) {
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{label}{status} {} = {} (limit {})", c.name, number(c.value), number(c.limit));
    }
    println!("{label}metrics written to {}", dir.join("metrics.json").display());
}

fn run_one(config: &ScenarioConfig, dir: &Path, label: &str) -> u8 {
    match run_to_dir(config, dir) {
        Ok(out) => {
            summarize(label, dir, &out.report);
            if out.report.passed() {
                0
            } else {
                CHECKS_FAILED
            }
        }
        Err(e) => {
            eprintln!("{label}error: {e}");
            error_code(&e)
        }
    }
}

fn run(kind: ScenarioKind, args: &RunArgs) -> u8 {
    if args.batch.is_empty() {
        let config = match load_config(kind, args.config.as_deref(), args.seed) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return error_code(&e);
            }
        };
        let dir = args
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| args.output_root.join(kind.name()));
        return run_one(&config, &dir, "");
    }
    let root = args.out.clone().unwrap_or_else(|| args.output_root.clone());
    let mut stems: Vec<String> = args
        .batch
        .iter()
        .map(|p| p.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string())
        .collect();
    let mut sorted = stems.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != stems.len() {
        // same file name from different directories: disambiguate by position
        stems = stems.iter().enumerate().map(|(i, s)| format!("{i}-{s}")).collect();
    }
    let codes: Vec<u8> = args
        .batch
        .par_iter()
        .zip(stems.par_iter())
        .map(|(path, stem)| {
            let label = format!("[{stem}] ");
            match load_config(kind, Some(path), args.seed) {
                Ok(config) => run_one(&config, &root.join(stem), &label),
                Err(e) => {
                    eprintln!("{label}error: {e}");
                    error_code(&e)
                }
            }
        })
        .collect();
    codes.into_iter().max().unwrap_or(0)
}

fn export(args: &ExportArgs) -> u8 {
    let trace = if args.trace.join(TRACE_DIR).is_dir() {
        args.trace.join(TRACE_DIR)
    } else {
        args.trace.clone()
    };
    let out = args.out.clone().unwrap_or_else(|| {
        let run_dir = if trace.ends_with(TRACE_DIR) { trace.parent().unwrap_or(&trace) } else { &trace };
        run_dir.join("plots")
    });
    match export_plots(&trace, &out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Learn(a) => run(ScenarioKind::Learn, a),
        Command::Reproduce(a) => run(ScenarioKind::Reproduce, a),
        Command::Teach(a) => run(ScenarioKind::Teach, a),
        Command::Comply(a) => run(ScenarioKind::Comply, a),
        Command::Export(a) => export(a),
    };
    ExitCode::from(code)
}
