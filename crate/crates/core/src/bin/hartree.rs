use clap::{Parser, Subcommand};
use hartree_fem::harness::{self, converge::RefineMode, HarnessError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite-element solver for the nonlocal Hartree equation on a square.
#[derive(Debug, Parser)]
#[command(name = "hartree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory and write diagnostics, snapshots and a summary.
    Run { config: PathBuf },
    /// Refinement study; writes convergence.csv to the output directory.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value = "refine-both", value_parser = parse_mode)]
        mode: RefineMode,
    },
    /// Write the mass, stiffness and potential matrices as text triplets.
    DumpMatrices { config: PathBuf },
}

fn parse_mode(s: &str) -> Result<RefineMode, String> {
    s.parse()
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let spec = harness::load_config(&config)?;
            let summary = harness::run(&spec)?;
            println!(
                "{} steps, max relative mass drift {:.3e}, max relative energy drift {:.3e}",
                summary.steps, summary.mass_drift, summary.energy_drift
            );
            println!("output: {}", summary.output.display());
        }
        Command::Converge {
            config,
            levels,
            mode,
        } => {
            let spec = harness::load_config(&config)?;
            let report = harness::converge(&spec, levels, mode)?;
            let path = spec.output.join("convergence.csv");
            report.write_csv(&path)?;
            print!("{}", report.to_csv());
            println!("output: {}", path.display());
        }
        Command::DumpMatrices { config } => {
            let spec = harness::load_config(&config)?;
            for path in harness::dump_matrices(&spec)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
