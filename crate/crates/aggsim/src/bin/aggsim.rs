use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aggsim::experiment::{
    burgers_check, convergence_study, counterexample, run_experiment, ExperimentConfig,
};
use aggsim::simplicial::validate_mesh_file;
use aggsim::Error;

/// Simulate measure-valued solutions of the aggregation equation with
/// pointy interaction potentials.
#[derive(Parser)]
#[command(name = "aggsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run { config: PathBuf },
    /// Run a convergence study over refinement levels and fit the rate.
    Study {
        config: PathBuf,
        /// Comma-separated cell counts, e.g. 50,100,200,400,800.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Measure the one-step energy increase of the upwind scheme on the
    /// three-atom configuration and extract its dt-coefficient.
    Counterexample {
        #[arg(long, default_value_t = 0.75)]
        p: f64,
        /// Comma-separated halving step sizes, e.g. 1e-3,5e-4,2.5e-4.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 5e-4, 2.5e-4])]
        dts: Vec<f64>,
    },
    /// Check the exact equivalence between the upwind scheme for
    /// W = |x| / 2 and the induced scalar conservation-law scheme.
    BurgersCheck { config: PathBuf },
    /// Validate a triangular mesh file (conformality, minimum height).
    ValidateMesh { file: PathBuf },
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg)?;
            let last = out.record.rows.last().expect("at least the initial row");
            println!(
                "scheme={} steps={} t_final={} mass={:.15} second_moment={:.6e}",
                out.record.scheme,
                out.record.step_count(),
                last.t,
                last.mass,
                last.second_moment
            );
            if let Some(curve) = &out.error_w2 {
                println!("e_max_w2={:.6e}", curve.e_max());
            }
            if let Some(curve) = &out.error_w1 {
                println!("e_max_w1={:.6e}", curve.e_max());
            }
            Ok(())
        }
        Command::Study { config, levels } => {
            let cfg = ExperimentConfig::load(&config)?;
            let study = convergence_study(&cfg, &levels)?;
            for row in &study.rows {
                println!(
                    "n_cells={} dx={:.6e} dt={:.6e} e_max_w2={:.6e} e_max_w1={:.6e}",
                    row.n_cells, row.dx, row.dt, row.e_max_w2, row.e_max_w1
                );
            }
            println!("slope={:.6} residual={:.6e}", study.fit.slope, study.fit.residual);
            Ok(())
        }
        Command::Counterexample { p, dts } => {
            let out = counterexample(p, &dts)?;
            for (dt, inc) in &out.increases {
                println!("dt={dt:.6e} energy_increase={inc:.12e}");
            }
            println!(
                "coefficient={:.9} target={:.9} relative_error={:.3e}",
                out.coefficient,
                out.target,
                (out.coefficient - out.target).abs() / out.target
            );
            Ok(())
        }
        Command::BurgersCheck { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = burgers_check(&cfg)?;
            println!("steps={} max_deviation={:.6e}", out.steps, out.max_deviation);
            Ok(())
        }
        Command::ValidateMesh { file } => {
            println!("{}", validate_mesh_file(&file)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
