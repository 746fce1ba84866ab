use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semistiff_cli::config::ExperimentConfig;
use semistiff_cli::run::{run, RunOptions};
use semistiff_cli::verify::verify;

/// Semi-stiff Ginzburg-Landau experiments on circular annuli.
///
/// Every flag can also be set through an environment variable with the
/// `SEMISTIFF_` prefix; the flag wins when both are given.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every run a config declares.
    Run {
        config: PathBuf,
        /// Independent runs executed at once.
        #[arg(long, env = "SEMISTIFF_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Output directory; defaults to the config's `output.dir`, then `out`.
        #[arg(long, env = "SEMISTIFF_OUT")]
        out: Option<PathBuf>,
        /// Replace the config's seed list with a single seed.
        #[arg(long, env = "SEMISTIFF_SEED")]
        seed: Option<u64>,
    },
    /// Re-check the artifacts of a finished run directory.
    Verify { dir: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, workers, out, seed } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let opts = RunOptions { workers, out: out.clone(), seed };
            match run(&cfg, &opts) {
                Ok(report) => {
                    println!("{} runs written to {}", report.records.len(), out.display());
                    for r in &report.records {
                        match (&r.error, &r.energy) {
                            (Some(e), _) => println!("  {}: failed: {e}", r.stem()),
                            (None, Some(e)) => println!("  {}: energy {:.6} ({:.4}π)", r.stem(), e.total, e.total / std::f64::consts::PI),
                            (None, None) => println!("  {}", r.stem()),
                        }
                    }
                    if report.failures > 0 {
                        eprintln!("{} runs failed", report.failures);
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify { dir } => {
            let checks = verify(&dir);
            for c in &checks {
                println!("{}", c.line());
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
