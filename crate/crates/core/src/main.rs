use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nematic::config::{self, Experiment};
use nematic::run::{execute, exit_code, resolve_output_dir};

#[derive(Parser)]
#[command(name = "nematic", version, about = "Compressible nematic liquid-crystal flow by Picard iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the sweep report, energies, norms and snapshots.
    Simulate(RunArgs),
    /// Manufactured-solution convergence orders of the three subsolvers.
    Mms(RunArgs),
    /// Sweep report plus the discrete nonlinear residual of the converged solution.
    PicardReport(RunArgs),
    /// Sensitivity of the solution to perturbed initial data.
    Continuity(RunArgs),
    /// Norm growth for small scaled-bump data.
    Smalldata(RunArgs),
    /// Initial velocity recovered through the compatibility problem.
    CompatRoundtrip(RunArgs),
    /// Repeated solves with the vacuum regularization halved each time.
    DeltaSweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; every key has a default when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory. Defaults to `output.dir`, then to $NEMATIC_OUTPUT_ROOT/<experiment>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override one key, e.g. `--override model.delta=1e-4`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Simulate(a) => (Experiment::Simulate, a),
            Command::Mms(a) => (Experiment::Mms, a),
            Command::PicardReport(a) => (Experiment::PicardReport, a),
            Command::Continuity(a) => (Experiment::Continuity, a),
            Command::Smalldata(a) => (Experiment::Smalldata, a),
            Command::CompatRoundtrip(a) => (Experiment::CompatRoundtrip, a),
            Command::DeltaSweep(a) => (Experiment::DeltaSweep, a),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (experiment, args) = Cli::parse().command.split();

    let mut overrides = args.overrides;
    overrides.push(format!("experiment.kind={}", experiment.as_str()));
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(exit_code(&e.into()) as u8);
            }
        },
        None => String::new(),
    };
    let cfg = match config::parse_with_overrides(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let dir = resolve_output_dir(&cfg, args.out.as_deref());
    ExitCode::from(execute(&cfg, &dir) as u8)
}
