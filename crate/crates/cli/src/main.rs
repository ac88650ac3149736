use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use walklab_cli::{run, Command, RunOptions, SEED_ENV};

/// Random walks on the torus: Wasserstein bounds and ergodic experiments.
///
/// The seed comes from the config's `seed` field unless WALKLAB_SEED is set,
/// which takes precedence.
#[derive(Parser)]
#[command(name = "walklab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "walklab-out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        out: cli.out,
        threads: cli.threads,
        seed_env: std::env::var(SEED_ENV).ok(),
    };
    match run(cli.command, cli.config.as_deref(), &opts) {
        Ok(m) => {
            for a in &m.artifacts {
                println!("{}\t{}", a.file, a.sha256);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
