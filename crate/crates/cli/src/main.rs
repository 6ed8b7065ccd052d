use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwave::error::CliError;
use qwave::scenario::OUT_DIR_ENV;
use qwave::verify::run_suite;
use qwave::{run, CliResult, LoadedScenario, Overrides};

/// Quantum wave simulation emulator: scenario files in, CSV and JSON out.
#[derive(Parser)]
#[command(name = "qwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the scenario and write snapshots, energies, measurements and a manifest.
    Simulate(ScenarioArgs),
    /// Evolve the scenario and write only the measurement results.
    Measure(ScenarioArgs),
    /// Slice and pre-simulate the scenario's sources.
    Presim(ScenarioArgs),
    /// Build and simulate the rotational state preparation circuit.
    Initcircuit(ScenarioArgs),
    /// Run a built-in property suite: symmetry, conservation, estimator, initcircuit, sources or all.
    Verify {
        suite: String,
        /// Base seed of the shot-mode checks.
        #[arg(long, default_value_t = 1000)]
        seed: u64,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory [default: scenario `output`, then $QWAVE_OUT_DIR, then ./qwave-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every shot-mode measurement.
    #[arg(long)]
    seed: Option<u64>,
    /// Shot count for every measurement; switches them to shot mode.
    #[arg(long)]
    shots: Option<usize>,
}

fn run_scenario(args: &ScenarioArgs, command: &Command) -> CliResult<()> {
    let loaded = LoadedScenario::load(&args.scenario)?;
    let overrides = Overrides { out: args.out.clone(), seed: args.seed, shots: args.shots };
    let bundle = match command {
        Command::Simulate(_) => run::simulate(&loaded, &overrides)?,
        Command::Measure(_) => run::measure(&loaded, &overrides)?,
        Command::Presim(_) => run::presim(&loaded, &overrides)?,
        Command::Initcircuit(_) => run::initcircuit(&loaded)?,
        Command::Verify { .. } => unreachable!("verify takes no scenario"),
    };
    let dir = loaded.output_dir(&overrides);
    for path in bundle.write(&dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Verify { suite, seed } => run_suite(suite, *seed).and_then(|report| {
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Numerical("verification failed".into()))
            }
        }),
        Command::Simulate(args) | Command::Measure(args) | Command::Presim(args) | Command::Initcircuit(args) => {
            run_scenario(args, &cli.command)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Io { .. }) {
                eprintln!("(set --out or {OUT_DIR_ENV} to choose another output directory)");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
