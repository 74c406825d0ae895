use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use monostab::checks::{run_suites, Suite};
use monostab::config::{parse_geometry, ExperimentConfig};
use monostab::experiment::run;
use monostab::{threads_from_env, Exit};
use monostab_core::models::wave::{mask_csv, WaveSystem};
use monostab_core::report::{all_pass, to_csv_with_system};
use monostab_core::{Error, Result};

#[derive(Parser)]
#[command(name = "monostab", version, about = "Saturated feedback for maximal monotone control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run sampled property suites; exits 1 on any violation.
    Check {
        /// projection, monotone, resolvent, lyapunov, geometry, coercivity or all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export the dogbone domain and control masks.
    Mask {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exit = match execute(cli.command) {
        Ok(exit) => exit,
        Err(e) => {
            eprintln!("monostab: {e}");
            Exit::for_error(&e)
        }
    };
    ExitCode::from(exit.code() as u8)
}

fn execute(cmd: Command) -> Result<Exit> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run(&cfg)?;
            match outcome.failure {
                None => {
                    println!("wrote {} files to {}", outcome.files.len(), outcome.output_dir.display());
                    Ok(Exit::Pass)
                }
                Some(e) => {
                    eprintln!(
                        "monostab: run stopped after {} steps: {e}; truncated outputs in {}",
                        outcome.simulation.steps_taken,
                        outcome.output_dir.display()
                    );
                    Ok(Exit::SolverFailure)
                }
            }
        }
        Command::Check { suite, seed, out } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let records = run_suites(&suites, seed, threads_from_env()?)?;
            let path = out.join(format!("check_{suite}.csv"));
            write(&path, &to_csv_with_system(&records))?;
            for r in records.iter().filter(|r| !r.pass) {
                eprintln!("violation: {} {} {} = {:e}", r.check, r.system, r.statistic, r.value);
            }
            let pass = all_pass(&records);
            println!("{} checks, {}; report {}", records.len(), if pass { "all pass" } else { "violations found" }, path.display());
            Ok(if pass { Exit::Pass } else { Exit::Violation })
        }
        Command::Mask { geometry, out } => {
            let text = std::fs::read_to_string(&geometry)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", geometry.display())))?;
            let (g, n) = parse_geometry(&text)?;
            let sys = WaveSystem::new(g, n)?;
            write(&out, &mask_csv(sys.grid(), &sys.control_keep()))?;
            Ok(Exit::Pass)
        }
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
