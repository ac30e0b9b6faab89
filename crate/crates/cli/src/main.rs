use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freesurf::runner::{simulate, verify_identities, write_artifacts, RunConfig, RunError};
use freesurf::validation::validate_bem;

#[derive(Parser)]
#[command(name = "freesurf", version, about = "Free-surface potential flow in a pinned box, with blow-up diagnostics")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the analytic-mode convergence suite of the boundary solver.
    ValidateBem {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute the verdicts of a finished run from its stored records.
    VerifyIdentities {
        #[arg(long)]
        run: PathBuf,
    },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: Cli) -> ExitCode {
    let quiet = cli.quiet;
    let mut log = |m: &str| eprintln!("{m}");
    match cli.command {
        Command::Simulate { config, out } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let output = match simulate(&cfg, if quiet { None } else { Some(&mut log) }) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            if let Err(e) = write_artifacts(&output, &cfg.output_dir) {
                return fail(e);
            }
            let r = &output.report;
            match &r.breakdown {
                Some(b) => println!("breakdown {} at t = {:.6e}", b.kind.as_str(), b.t_break),
                None => println!("reached t = {:.6e} without breakdown", r.t_final),
            }
            println!(
                "{} records written to {}; checks {}",
                r.records,
                cfg.output_dir.display(),
                if r.checks_passed() { "passed" } else { "FAILED" }
            );
            ExitCode::from(r.exit_code() as u8)
        }
        Command::ValidateBem { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let v = &cfg.validation;
            match validate_bem(&v.panel_counts, &v.modes, cfg.solver_options()) {
                Ok(result) => {
                    print!("{}", result.table());
                    ExitCode::from(result.exit_code() as u8)
                }
                Err(e) => fail(RunError::Input(e.to_string())),
            }
        }
        Command::VerifyIdentities { run } => match verify_identities(&run) {
            Ok(outcome) => {
                for (name, b) in outcome.verdicts.booleans() {
                    let shown = b.map_or("skipped".to_string(), |v| v.to_string());
                    println!("{name}: {shown}");
                }
                for m in &outcome.mismatches {
                    println!("mismatch {m}");
                }
                ExitCode::from(outcome.exit_code() as u8)
            }
            Err(e) => fail(e),
        },
    }
}

fn main() -> ExitCode {
    run(Cli::parse())
}
