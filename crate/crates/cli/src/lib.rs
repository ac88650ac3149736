//! Config-driven batch runs of the walklab experiments.
//!
//! Each run reads one JSON config, writes its artifacts into the output
//! directory and finishes with `manifest.json`. A manifest is itself accepted
//! as a config, so `walklab bounds --config out/manifest.json` repeats a run.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use walklab_core::Error as CoreError;

pub use config::{parse_config, ExperimentConfig, SeedSource, SEED_ENV};
pub use manifest::{sha256_hex, Manifest};

pub const TOOL_NAME: &str = "walklab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Lattice system and step law of the configured walk.
    Construct,
    /// Diophantine constant and spectral gap.
    Quality,
    /// Lower, exact and upper Wasserstein values per k.
    Bounds,
    /// Spectral asymptotic variance and its Monte Carlo estimate.
    Variance,
    Clt,
    Lil,
    /// Coupled block sums.
    Blocks,
    /// Rate exponents of the bundled walks.
    Reproduce,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::Quality => "quality",
            Command::Bounds => "bounds",
            Command::Variance => "variance",
            Command::Clt => "clt",
            Command::Lil => "lil",
            Command::Blocks => "blocks",
            Command::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Cap(String),
    #[error("{0}")]
    Invariant(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Maps a core error; `context` names the config field it came from, and
    /// a trailing `.` means the core field name is appended.
    pub fn from_core(e: CoreError, context: &str) -> Self {
        let field = |inner: &str| {
            if context.is_empty() {
                inner.to_string()
            } else if let Some(prefix) = context.strip_suffix('.') {
                if prefix.is_empty() || inner.is_empty() {
                    format!("{prefix}{inner}")
                } else {
                    format!("{prefix}.{inner}")
                }
            } else {
                context.to_string()
            }
        };
        let message = e.to_string();
        match e {
            CoreError::InvalidInput { field: f, reason } => CliError::validation(field(&f), reason),
            CoreError::CapExceeded { .. } | CoreError::InsufficientCoverage { .. } => CliError::Cap(message),
            CoreError::Invariant(_) => CliError::Invariant(message),
            _ => CliError::validation(field(""), message),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Cap(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation { .. } => "validation",
            CliError::Cap(_) => "cap_exceeded",
            CliError::Invariant(_) => "invariant",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let Some(f) = self.field() {
            v["field"] = json!(f);
        }
        v.to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Invocation options outside the config document.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Value of `WALKLAB_SEED`, if set.
    pub seed_env: Option<String>,
}

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("--config", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Runs `command` and returns its manifest, which is also written to
/// `out/manifest.json`.
pub fn run(command: Command, config_path: Option<&Path>, opts: &RunOptions) -> Result<Manifest, CliError> {
    let start = Instant::now();
    if opts.threads == Some(0) {
        return Err(CliError::validation("--threads", "must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::create_dir_all(&opts.out)?;

    let mut manifest = if command == Command::Reproduce {
        if config_path.is_some() {
            return Err(CliError::validation("--config", "`reproduce` runs the bundled configs"));
        }
        let mut m = Manifest::new(command, None, None, pool.current_num_threads());
        pool.install(|| commands::reproduce(&opts.out, &mut m))?;
        m
    } else {
        let path = config_path.ok_or_else(|| CliError::validation("--config", "required"))?;
        let mut cfg = read_config(path)?;
        let source = config::apply_seed_override(&mut cfg, opts.seed_env.clone())?;
        cfg.validate(command)?;
        cfg.command = Some(command);
        let mut m = Manifest::new(command, Some(cfg.clone()), Some(source), pool.current_num_threads());
        pool.install(|| commands::dispatch(command, &cfg, &opts.out, &mut m))?;
        m
    };
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.write(&opts.out)?;
    Ok(manifest)
}
