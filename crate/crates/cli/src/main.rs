//! `hadlab`: single runs, experiments and oracle checks for the HAD process.
//!
//! Exit codes: 0 on success or a passing verdict, 1 on a failing verdict,
//! 2 on usage or configuration errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use had_core::experiments::{run_experiment, selftest, ExperimentConfig, ExperimentName};
use had_core::had_engine::{run, write_trajectories_csv, BoxParams};
use had_core::lpp_oracle::{longest_chain_decorated, read_decorated_csv};
use had_core::randgen::{derive_stream, poisson_1d, poisson_2d, StreamKey};

/// Seed used when `--seed` is omitted.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "hadlab", version, about = "Hammersley-Aldous-Diaconis process laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One engine run in the box [0, x] x [0, t].
    Run {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Write particle trajectories as CSV.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Run a named experiment and print its summary as JSON.
    Experiment {
        #[arg(long)]
        name: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        replicas: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Longest chain of a decorated point file (kind,y,s).
    Lpp {
        #[arg(long)]
        points: PathBuf,
    },
    /// Estimate of L_n / sqrt(n) for n uniform points.
    Ulam {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        replicas: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact invariants on small random instances.
    Selftest {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Verdict,
    Usage(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("notice: no --seed given, using seed {DEFAULT_SEED}");
        DEFAULT_SEED
    })
}

fn verdict(passed: bool) -> Result<(), Failure> {
    if passed {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn print_json(value: serde_json::Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            lambda,
            rho,
            t,
            x,
            seed,
            trajectories,
        } => {
            let seed = seed_or_default(seed);
            let bounds = BoxParams::new(x, t)?;
            let mut rng = derive_stream(&StreamKey::new(seed).child("run", 0, "noise"));
            let sources = poisson_1d(lambda, x, &mut rng)?;
            let sinks = poisson_1d(rho, t, &mut rng)?;
            let bulk = poisson_2d(1.0, x, t, &mut rng)?;
            let out = run(&sources, &sinks, &bulk, bounds, trajectories.is_some())?;
            println!("sources {}", out.source_count);
            println!("final_particles {}", out.final_positions.len());
            println!("entries {}", out.entries.len());
            println!("sink_events {}", out.sink_events);
            println!("created {}", out.created);
            println!("particle_total {}", out.particle_total());
            println!("conservation {}", out.conservation_holds());
            if let (Some(path), Some(paths)) = (trajectories, out.trajectories.as_deref()) {
                write_trajectories_csv(paths, BufWriter::new(File::create(path)?))?;
            }
            verdict(out.conservation_holds())
        }
        Command::Experiment {
            name,
            lambda,
            rho,
            gamma,
            t,
            x,
            points,
            replicas,
            seed,
            out,
        } => {
            let name: ExperimentName = name.parse()?;
            let config = ExperimentConfig {
                name,
                lambda,
                rho,
                gamma,
                t,
                x,
                points,
                replicas,
                master_seed: seed_or_default(seed),
                out_dir: out,
            };
            let manifest = run_experiment(&config)?;
            print_json(serde_json::to_value(&manifest.results)?)?;
            eprintln!(
                "{}: {} ({} corrupted, {:.2}s)",
                name,
                if manifest.passed { "PASS" } else { "FAIL" },
                manifest.corrupted,
                manifest.wall_clock_secs
            );
            verdict(manifest.passed)
        }
        Command::Lpp { points } => {
            let pts = read_decorated_csv(File::open(points)?)?;
            println!("{}", longest_chain_decorated(&pts));
            Ok(())
        }
        Command::Ulam { n, replicas, seed } => {
            let config = ExperimentConfig::new(ExperimentName::Ulam, replicas, seed_or_default(seed))
                .with_points(n);
            let manifest = run_experiment(&config)?;
            let est = manifest.results.estimate("mean_ratio").expect("ulam reports mean_ratio");
            println!(
                "n {} replicas {} mean {} ci [{}, {}]",
                n,
                replicas,
                est.value,
                est.ci_low.unwrap_or(f64::NAN),
                est.ci_high.unwrap_or(f64::NAN)
            );
            verdict(manifest.passed)
        }
        Command::Selftest { instances, seed } => {
            let report = selftest(instances, seed_or_default(seed))?;
            print_json(serde_json::to_value(&report)?)?;
            verdict(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
