//! `plate-uc`: runs the plate pipeline stages from a TOML configuration.
//!
//! Exit codes: 0 on success, 2 when the input is rejected, 3 when a
//! numerical stage fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plate_core::config::PipelineConfig;
use plate_core::pipeline::{run_pipeline, RunManifest, RunOptions, Stage, Status};
use plate_core::plot::emit_plot_data;
use plate_core::Error;

#[derive(Parser)]
#[command(name = "plate-uc", version, about = "Supported plate solver, flattening, reflection and doubling diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; created if needed.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Recompute even when the manifest says the outputs are current.
    #[arg(long)]
    force: bool,
    /// Override the plate resolution (2^k + 1).
    #[arg(long, value_name = "N")]
    resolution: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the plate problem.
    Solve(RunArgs),
    /// Build and check the conformal chart.
    FlattenChart(RunArgs),
    /// Pull the solution back and apply the twist.
    Transform(RunArgs),
    /// Odd reflection and the extension residual.
    Reflect(RunArgs),
    /// Carleman ratio sweep over the seeded test family.
    CarlemanSweep(RunArgs),
    /// Boundary masses, frequency and quasi-doubling check.
    Doubling(RunArgs),
    /// All stages in dependency order.
    Pipeline(RunArgs),
    /// Two-column plot files from the reports in DIR.
    PlotData {
        /// Directory holding the reports.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
        /// Where to write the .dat files; defaults to DIR/plots.
        #[arg(long, value_name = "DIR")]
        plots: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> Result<PipelineConfig, Error> {
    let cfg = PipelineConfig::load(&args.config)?;
    match args.resolution {
        Some(n) => cfg.with_resolution(n),
        None => Ok(cfg),
    }
}

fn report(out: &Path, m: &RunManifest) {
    if m.reused {
        println!("up to date: outputs in {} match manifest checksums", out.display());
    }
    for s in &m.stages {
        let status = match s.status {
            Status::Ok => "ok",
            Status::Failed => "FAILED",
        };
        let value = s.residual.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!("{:<15} {status:<6} {}={value} ({:.2} s, {} files)", s.stage.name(), s.residual_name, s.seconds, s.files.len());
    }
}

fn run(args: RunArgs, target: Option<Stage>) -> Result<(), Error> {
    let cfg = load(&args)?;
    let opts = RunOptions { target, force: args.force };
    match run_pipeline(&cfg, &args.out, opts) {
        Ok(m) => {
            report(&args.out, &m);
            Ok(())
        }
        Err(e) => {
            if let Ok(m) = RunManifest::read(&args.out) {
                report(&args.out, &m);
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run(a, Some(Stage::Solve)),
        Command::FlattenChart(a) => run(a, Some(Stage::FlattenChart)),
        Command::Transform(a) => run(a, Some(Stage::Transform)),
        Command::Reflect(a) => run(a, Some(Stage::Reflect)),
        Command::CarlemanSweep(a) => run(a, Some(Stage::CarlemanSweep)),
        Command::Doubling(a) => run(a, Some(Stage::Doubling)),
        Command::Pipeline(a) => run(a, None),
        Command::PlotData { out, plots } => {
            let dest = plots.unwrap_or_else(|| out.join("plots"));
            emit_plot_data(&out, &dest).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
