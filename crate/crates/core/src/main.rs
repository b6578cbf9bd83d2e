use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use kspace::experiments::{
    parse_tolerance, resolve_out_dir, run_and_write, write_report, ExperimentConfig,
    ExperimentError, Overrides, Registry,
};

#[derive(Parser)]
#[command(name = "kspace", version, about = "Kernel-space embedding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norm of the unit gaussian under the normalized kernel as L grows.
    NormConvergence(RunArgs),
    /// Induced metrics of catalog manifolds against their analytic metrics.
    MetricRecovery(RunArgs),
    /// Poincaré Gram invariance and span-operator commutativity.
    GramInvariance(RunArgs),
    /// Schrödinger residuals and time-sliced velocity components.
    SliceDynamics(RunArgs),
    /// Chordal distance on the circle under the periodic Sobolev kernel.
    CircleTopology(RunArgs),
    /// Krein signs, quadrature oracle and the divergence criterion.
    OracleCheck(RunArgs),
    /// Summarize the reports in a results directory as markdown.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for all random sampling (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config, then $KSPACE_OUT_DIR, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a tolerance, NAME=VALUE; repeatable.
    #[arg(long = "tolerance", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    /// Write the elements used by the run as JSON.
    #[arg(long)]
    dump_elements: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Results directory (default: $KSPACE_OUT_DIR, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_experiment(name: &str, args: &RunArgs) -> Result<bool> {
    let registry = Registry::default();
    let exp = registry.get(name)?;
    let config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: args.seed,
        out_dir: args.out.clone(),
        tolerances: args
            .tolerances
            .iter()
            .map(|t| parse_tolerance(t))
            .collect::<Result<_, _>>()?,
        dump_elements: args.dump_elements,
    };
    let (report, path) = run_and_write(exp, &config, &overrides)?;
    for m in &report.measurements {
        println!(
            "  {:<24} {:>14.6e}  {} {:e}  {}",
            m.name,
            m.value,
            m.bound.symbol(),
            m.limit,
            if m.passed { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{}: {} (seed {}, {:.2} s) -> {}",
        report.experiment,
        if report.passed { "PASS" } else { "FAIL" },
        report.seed,
        report.wall_time_s,
        path.display()
    );
    Ok(report.passed)
}

fn run(cli: &Cli) -> Result<bool> {
    let (name, args) = match &cli.command {
        Command::NormConvergence(a) => ("norm-convergence", a),
        Command::MetricRecovery(a) => ("metric-recovery", a),
        Command::GramInvariance(a) => ("gram-invariance", a),
        Command::SliceDynamics(a) => ("slice-dynamics", a),
        Command::CircleTopology(a) => ("circle-topology", a),
        Command::OracleCheck(a) => ("oracle-check", a),
        Command::Report(a) => {
            let dir = resolve_out_dir(a.out.as_deref(), None);
            let (path, passed) = write_report(&dir)?;
            println!(
                "{} -> {}",
                if passed { "PASS" } else { "FAIL" },
                path.display()
            );
            return Ok(passed);
        }
    };
    run_experiment(name, args).with_context(|| format!("{name} failed to run"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<ExperimentError>())
                .map_or(1, ExperimentError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
