use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use twinlink::scenario::Scenario;
use twinlink::serve::{run_server, ServeOptions};

/// Digital-twin teleoperation: scripted replay, live server, solver bench.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory file through the full pipeline and write the event
    /// log, statistics and run manifest.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Host a live session for bus and browser clients.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: String,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Time the motion-policy solver on random instances.
    Bench {
        #[arg(long, default_value_t = 1000)]
        solver_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Replay {
            config,
            trajectory,
            out,
            seed,
        } => {
            let run = twinlink::replay::replay_files(&config, &trajectory, &out, seed)?;
            let s = &run.stats;
            println!(
                "{} picks, {} places, {} drops, {} collapses, {} towers in {:.2} s; wrote {}",
                s.picks,
                s.places,
                s.drops,
                s.collapses,
                s.towers,
                run.manifest.simulated_seconds,
                out.display()
            );
        }
        Command::Serve {
            config,
            listen,
            speed,
        } => {
            let scenario = Scenario::load(&config)?;
            run_server(scenario, &listen, ServeOptions { speed, seed: None })?;
        }
        Command::Bench {
            solver_instances,
            seed,
        } => {
            let r = twinlink::bench::run_solver_bench(solver_instances, seed);
            println!(
                "{} instances: total {:.3} ms, mean {:.2} us, slowest {:.2} us (checksum {:.6})",
                r.instances,
                r.total.as_secs_f64() * 1e3,
                r.mean().as_secs_f64() * 1e6,
                r.slowest.as_secs_f64() * 1e6,
                r.checksum
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("TWINLINK_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
