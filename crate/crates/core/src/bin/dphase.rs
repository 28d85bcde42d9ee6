use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dphase::config::RunConfig;
use dphase::{scenario, Error};

#[derive(Parser)]
#[command(name = "dphase", version, about = "Variable-exponent double phase laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Report directory (default: `output` from the config, else `./out`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated verify suites.
        #[arg(long, value_delimiter = ',')]
        suite: Option<Vec<String>>,
    },
}

fn execute(cli: Cli) -> Result<scenario::Outcome, Error> {
    let Command::Run { config, output, seed, suite } = cli.command;
    let mut cfg = RunConfig::from_path(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    scenario::run(&cfg, &dir, suite.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("dphase: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
