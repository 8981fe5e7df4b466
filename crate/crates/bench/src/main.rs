use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exosim_bench::{exit_code, load_scenario, run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "bench", version, about = "Actuator benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-loop torque frequency response and -3 dB bandwidth
    Bandwidth(Args),
    /// Peak resistive torque of the unpowered actuator under a hip sweep
    Backdrive(Args),
    /// Bandwidth, backdrive and open-loop parameters side by side
    Benchmark(Args),
    /// Estimator, profile and torque loop tracking on a walking hip
    Track(Args),
    /// Synthesize gait data and train the phase estimator
    TrainGait(Args),
    /// Transfer-function coefficients, poles and natural frequency per spec
    Tf(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory [default: the scenario's `output`, else out/<scenario>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random stage, overriding the scenario
    #[arg(long)]
    seed: Option<u64>,
    /// Record the wall-clock time in the report
    #[arg(long)]
    timestamp: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Bandwidth(a) => (Command::Bandwidth, a),
        Cmd::Backdrive(a) => (Command::Backdrive, a),
        Cmd::Benchmark(a) => (Command::Benchmark, a),
        Cmd::Track(a) => (Command::Track, a),
        Cmd::TrainGait(a) => (Command::TrainGait, a),
        Cmd::Tf(a) => (Command::Tf, a),
    };
    let result = load_scenario(&args.scenario).and_then(|s| {
        let s = match args.seed {
            Some(seed) => s.with_seed(seed),
            None => s,
        };
        let report = run(command, &s, &RunOptions { timestamp: args.timestamp })?;
        let dir = args
            .out
            .or_else(|| s.output.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
        report.write(&dir)?;
        // a closed pipe is not a failure of the run
        let mut out = std::io::stdout().lock();
        let _ = write!(out, "{}", report.to_text()).and_then(|_| writeln!(out, "wrote {}", dir.display()));
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
