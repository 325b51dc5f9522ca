use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crowdlab::harness::{self, CompareMetric, RunOptions, Suite};
use crowdlab::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "crowdlab", version, about = "Nonlocal crowd dynamics simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Output root; defaults to $CROWDLAB_OUT, then ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write PGM frames.
        #[arg(long)]
        frames: bool,
        /// Stop at this time instead of the configured end time.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Run an acceptance suite: all, scenarios, bounds, wasserstein, sensitivity, qualitative or 1-12.
    Verify { suite: String },
    /// Compare the outputs of two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Metrics file name inside each run directory.
        #[arg(long, default_value = "metrics.csv")]
        metrics_file: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L1,
    W1,
    Evac,
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_solver_abort() { EXIT_SOLVER } else { EXIT_VALIDATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            frames,
            until,
        } => {
            let cfg = match harness::parse_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let root = out
                .or_else(|| std::env::var_os("CROWDLAB_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs"));
            match harness::run_scenario(&cfg, &root, &RunOptions { frames, until }) {
                Ok(outcomes) => {
                    for o in outcomes {
                        let last = o.trajectory.last();
                        println!(
                            "{}: t = {}, {} steps, mass {:?} -> {}",
                            o.label,
                            last.t,
                            o.trajectory.steps.len(),
                            o.trajectory.initial_mass,
                            o.dir.display()
                        );
                        for b in &o.bounds {
                            println!("  bound {}: {} <= {} ({})", b.name, b.lhs, b.rhs, b.satisfied);
                        }
                        for (p, e) in o.evacuation.iter().enumerate() {
                            if let Some(e) = e {
                                println!("  evacuation time pop {p}: {}", e.time);
                            }
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { suite } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let reports = harness::run_suite(suite);
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().any(|r| !r.passed && !r.qualitative) {
                ExitCode::from(EXIT_ACCEPTANCE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Compare {
            run_a,
            run_b,
            metric,
            metrics_file,
        } => {
            let m = match metric {
                MetricArg::L1 => CompareMetric::L1,
                MetricArg::W1 => CompareMetric::W1,
                MetricArg::Evac => CompareMetric::Evac,
            };
            match harness::compare_runs(&run_a, &run_b, m, &metrics_file) {
                Ok(v) => {
                    println!("{v}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
