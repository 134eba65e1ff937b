//! The `lipflow` command line: run configs, subcommands and file formats.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod cloud_io;
pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use config::{load_config, parse_config, ConfigError, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },

    #[error("{context}: {source}")]
    Core { context: String, source: lipflow::Error },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(lipflow::Error) -> Self {
        let context = context.into();
        move |source| Self::Core { context, source }
    }
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl Globals {
    pub fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}
