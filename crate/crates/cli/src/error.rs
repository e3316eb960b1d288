use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or value problem in the configuration, with its key path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Capacity(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Attach a key path to a core error.
    pub fn from_core(path: &str, e: rydkin_core::Error) -> Self {
        use rydkin_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Validation(_) => CliError::config(path, e.to_string()),
            E::Capacity(m) => CliError::Capacity(m),
            E::UndefinedStatistic(_) | E::Integrator { .. } | E::FitFailure(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
