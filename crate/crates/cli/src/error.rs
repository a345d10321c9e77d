use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("`{0}` is neither a preset name nor a readable config file")]
    UnknownTarget(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("simulation anomaly: {0}")]
    Simulation(cuk_pllf_core::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration and I/O problems, 3 for simulation anomalies.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::UnknownTarget(_) | CliError::Io { .. } => 2,
            CliError::Simulation(_) => 3,
        }
    }
}
