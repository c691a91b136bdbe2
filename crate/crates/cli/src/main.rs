use cavsolve_cli::config::RunConfig;
use cavsolve_cli::oracle_check::{benchmark_setup, format_report, oracle_report};
use cavsolve_cli::replay::replay_csv;
use cavsolve_cli::run::{cmd_run, RunError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 1 solver or check failure, 2 configuration error.
#[derive(Parser)]
#[command(
    name = "cavsolve",
    version,
    about = "Energy-minimizing deformations with a prescribed cavity volume on the punctured disk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the penalty-multiplier continuation described by a JSON config.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output.dir` from the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Stream per-step flow diagnostics to `flow_eps_<eps>.csv`.
        #[arg(long)]
        trace_flow: bool,
        /// Dump nodal solutions and mesh tables per stage.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Evaluate the closed-form identity suite and print pass/fail per item.
    OracleCheck {
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Re-derive the mu and eta columns of a reference iteration table from
    /// its c column and report any mismatch.
    ReplayTable1 {
        /// Path to the CSV table (shipped at data/table1.csv).
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CAVSOLVE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => cavsolve_core::parallel::set_threads(n),
            _ => {
                eprintln!("config error at `CAVSOLVE_THREADS`: expected a positive integer");
                return ExitCode::from(2);
            }
        }
    }

    match Cli::parse().command {
        Command::Run {
            config,
            out_dir,
            trace_flow,
            dump_fields,
        } => {
            let mut cfg = match RunConfig::from_path(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            cfg.output.trace_flow |= trace_flow;
            cfg.output.dump_fields |= dump_fields;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            match cmd_run(&cfg, &dir, false) {
                Ok(outcome) => {
                    println!(
                        "summary written to {}",
                        outcome.out_dir.join("summary.json").display()
                    );
                    if outcome.summary.converged {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("run finished without meeting the convergence criteria");
                        ExitCode::from(1)
                    }
                }
                Err(RunError::Config(e)) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::OracleCheck { json } => {
            let (material, boundary, volume) = benchmark_setup();
            let checks = oracle_report(&material, &boundary, volume);
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&checks).expect("report serializes")
                );
            } else {
                print!("{}", format_report(&checks));
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::ReplayTable1 { csv } => {
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!(
                        "config error at `--csv`: cannot read {}: {e}",
                        csv.display()
                    );
                    return ExitCode::from(2);
                }
            };
            match replay_csv(&text) {
                Ok(outcome) => {
                    if outcome.all_match() {
                        println!(
                            "replayed {} rows in {} blocks: all multipliers and penalties match",
                            outcome.rows, outcome.blocks
                        );
                        ExitCode::SUCCESS
                    } else {
                        for m in &outcome.mismatches {
                            println!("mismatch: {m}");
                        }
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
