use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bohm_pair::config::{validate, RawConfig};
use bohm_pair::run::{load_config, run, Status};

#[derive(Parser)]
#[command(name = "bohm-pair", version, about = "Pilot-wave trajectories of entangled particle pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected analyses and write CSV/JSON outputs.
    #[command(allow_negative_numbers = true)]
    Run {
        /// JSON configuration file; command-line keys override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: RawConfig,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run { config, overrides } = cli.command;

    let raw = match config {
        Some(path) => load_config(&path).and_then(|base| base.merge(overrides)),
        None => Ok(overrides),
    };
    let cfg = match raw.and_then(validate) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match run(&cfg) {
        Ok(outcome) => {
            for c in &outcome.claims {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Measured => "measured",
                };
                println!("{status:>8}  {}  {}", c.claim_id, c.value);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
