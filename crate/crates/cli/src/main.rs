use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbm_harnack_cli::{run, sweep, ExperimentConfig, RunError, EXIT_ERROR, EXIT_OK, EXIT_VIOLATED};

#[derive(Parser)]
#[command(name = "fbm-harnack", version, about = "Monte Carlo checks for SDEs driven by rough fBm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run one experiment per value of a numeric key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let a = run(&cfg)?;
            for c in &a.outcome.checks {
                if c.ok == Some(false) {
                    eprintln!("violated: {} (margin {:e})", c.name, c.margin);
                }
            }
            println!("{}", a.summary_path.display());
            Ok(a.outcome.all_hold())
        }
        Command::Sweep {
            config,
            overrides,
            axis,
            values,
        } => {
            let cfg = load(&config, &overrides)?;
            let a = sweep(&cfg, &axis, &values)?;
            println!("{}", a.path.display());
            Ok(a.all_hold)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { EXIT_OK as u8 });
        }
    };
    let code = match execute(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
