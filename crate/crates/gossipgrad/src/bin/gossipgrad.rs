//! Thin CLI over the harness: run/describe/list experiments and run the
//! lemma-inequality check suite.
//!
//! Exit codes: 0 success, 1 validation/configuration, 2 divergence, 3 I/O.

use clap::{Parser, Subcommand};
use gossipgrad::harness::{self, RunOptions};
use gossipgrad::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gossipgrad", version, about = "Decentralized SGD simulator and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a shipped experiment by name or a config file by path.
    Run {
        config: String,
        /// Output directory for CSV/JSON artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker thread count (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the recording stride.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Print the resolved config plus derived quantities without running.
    Describe { config: String },
    /// List shipped experiment names.
    List,
    /// Run the lemma-inequality check suite.
    Check,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Divergence { .. } => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seeds,
            threads,
            stride,
        } => {
            let cfg = harness::resolve(&config)?;
            let opts = RunOptions {
                out_dir: out.clone(),
                threads,
                seeds,
                stride,
            };
            let summary = harness::run_experiment(&cfg, &opts)?;
            println!(
                "{}: {} settings, {} seeds, {:.1}s -> {}",
                summary.name,
                summary.settings.len(),
                summary.seed_count,
                summary.wall_clock_secs,
                out.display()
            );
            for s in &summary.settings {
                let transient = match (s.transient_estimated, s.transient_iteration) {
                    (false, _) => "-".to_string(),
                    (true, Some(t)) => t.to_string(),
                    (true, None) => "not reached".to_string(),
                };
                println!(
                    "  {:<24} rho={:.4} transient={} final_avg_gap={:.3e}",
                    s.label, s.rho, transient, s.final_avg_gap
                );
            }
            Ok(())
        }
        Cmd::Describe { config } => {
            let cfg = harness::resolve(&config)?;
            print!("{}", harness::describe(&cfg)?);
            Ok(())
        }
        Cmd::List => {
            for name in harness::list_experiments() {
                println!("{name}");
            }
            Ok(())
        }
        Cmd::Check => {
            let reports = harness::run_all_checks()?;
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{}: {} ({:.2}% of iterations; {})",
                    r.name,
                    if r.pass { "PASS" } else { "FAIL" },
                    100.0 * r.fraction_ok,
                    r.details
                );
                all_pass &= r.pass;
            }
            if all_pass {
                Ok(())
            } else {
                Err(Error::Validation("lemma check suite failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
