use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ambit_flux::harness::{self, read_reports, Experiment, ExperimentConfig};
use ambit_flux::Result;
use clap::{Args, Parser, Subcommand};

/// Monte Carlo verification of local limit theorems for energy fluxes of
/// ambit fields.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic identities: AC, section/cap, mass, divergence, erosion,
    /// domain of attraction.
    VerifyIdentities(RunArgs),
    /// IQR scaling exponent of the energy flux over radii.
    FluxScan(RunArgs),
    /// Convergence of Z/r to the finite-variation limit.
    FvLimit(RunArgs),
    /// Law of the normalized functional against the stable limit.
    LimitLaw(RunArgs),
    /// Self-similarity and path regularity of the limit field.
    YSelfsim(RunArgs),
    /// Summarizes the reports found under the output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// INI config; built-in defaults fill missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: run.out, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// `section.key=value`, applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(experiment: Experiment, args: RunArgs) -> Result<bool> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides = args.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    let cfg = ExperimentConfig::load(experiment, &text, &overrides)?;
    let out = args.out.unwrap_or_else(|| cfg.out.clone());
    let start = Instant::now();
    let output = harness::run(&cfg, args.threads)?;
    let files = output.write(&out)?;
    print!("{}", output.report.summary());
    println!("({:.1} s, {} files under {})", start.elapsed().as_secs_f64(), files.len(), out.display());
    Ok(output.report.passed())
}

fn report(out: PathBuf) -> Result<bool> {
    let reports = read_reports(&out)?;
    if reports.is_empty() {
        println!("no reports under {}", out.display());
        return Ok(false);
    }
    for r in &reports {
        print!("{}", r.summary());
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::VerifyIdentities(a) => run(Experiment::VerifyIdentities, a),
        Command::FluxScan(a) => run(Experiment::FluxScan, a),
        Command::FvLimit(a) => run(Experiment::FvLimit, a),
        Command::LimitLaw(a) => run(Experiment::LimitLaw, a),
        Command::YSelfsim(a) => run(Experiment::YSelfsim, a),
        Command::Report { out } => report(out),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
