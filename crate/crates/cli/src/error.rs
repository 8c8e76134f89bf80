use std::path::PathBuf;

use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Calibration(_) => 4,
            CliError::Divergence(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<diffest::Error> for CliError {
    fn from(e: diffest::Error) -> Self {
        use diffest::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Config(msg),
            E::Dimension(_) | E::NotHermitian { .. } | E::Domain { .. } | E::WrongKind { .. } => {
                CliError::Data(msg)
            }
            E::NotHurwitz(_) | E::Underdetermined(_) => CliError::Calibration(msg),
            E::Unstable { .. } | E::NotPositiveDefinite(_) | E::Numerical(_) => {
                CliError::Divergence(msg)
            }
        }
    }
}
