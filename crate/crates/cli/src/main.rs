use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simlab::lab::{
    load_config, run_experiment, verify_suite, ExperimentKind, LabError, ReportPaths, SUITES,
};

#[derive(Parser)]
#[command(
    name = "simlab",
    version,
    about = "Similarity-to-contraction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Similarity constants of operators or semigroup samples.
    Analyze(RunArgs),
    /// Scale tensor factors and certify each one.
    Split(RunArgs),
    /// Interpolate an operator by a semigroup on the circle grid.
    Interpolate(RunArgs),
    /// Norms, radii and constants of gallery models.
    Gallery(RunArgs),
    /// Dyadic profile of sample constants against the semigroup constant.
    Crsim(RunArgs),
    /// Run a named invariant suite.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "kappa-max")]
    kappa_max: Option<f64>,
    /// Relative tolerance `tol_rel`.
    #[arg(long)]
    tol: Option<f64>,
    /// Replace existing reports.
    #[arg(long)]
    force: bool,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<bool, LabError> {
    let mut cfg = load_config(&args.config)?;
    if cfg.kind != kind {
        return Err(LabError::Input {
            label: args.config.display().to_string(),
            message: format!("config describes a {} experiment, not {kind}", cfg.kind),
        });
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(k) = args.kappa_max {
        cfg.kappa_max = k;
        cfg.tol.kappa_max = k;
    }
    if let Some(t) = args.tol {
        cfg.tol.tol_rel = t;
    }
    cfg.overwrite = args.force;
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    let paths = ReportPaths::for_config(&cfg);
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    println!("{} rows, {failed} failed", report.rows.len());
    println!("csv  {}", paths.csv.display());
    println!("json {}", paths.json.display());
    Ok(report.passed())
}

fn verify(name: &str) -> Result<bool, LabError> {
    let report = verify_suite(name)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {} ({})", c.name, c.detail);
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => run(ExperimentKind::Analyze, a),
        Command::Split(a) => run(ExperimentKind::Split, a),
        Command::Interpolate(a) => run(ExperimentKind::Interpolate, a),
        Command::Gallery(a) => run(ExperimentKind::Gallery, a),
        Command::Crsim(a) => run(ExperimentKind::Crsim, a),
        Command::Verify { suite } => verify(&suite),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 3 })
        }
    }
}
