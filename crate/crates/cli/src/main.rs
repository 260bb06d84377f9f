use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use miclab_cli::{run, Command, JobSpec, Status};

/// Characteristic matrices and Monte Carlo bound checks.
///
/// Exit status: 0 on success, 1 on a config or I/O error, 2 when a bound
/// that must always hold was violated.
#[derive(Parser, Debug)]
#[command(name = "miclab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
    /// Override a config value; dotted keys reach nested fields.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    let job = JobSpec {
        command: args.command,
        config_path: args.config,
        output_dir: args.out,
        overrides: args.set,
        seed: args.seed,
    };
    match run(&job) {
        Ok(report) => {
            println!("{}", report.summary);
            if let Status::InvariantViolated(msg) = &report.status {
                eprintln!("invariant violated: {msg}");
            }
            ExitCode::from(report.status.exit_code())
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
