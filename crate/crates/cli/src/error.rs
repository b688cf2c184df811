use std::path::PathBuf;

use sugsvarsel::data::DataError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input data.
    #[error("{0}")]
    Input(String),

    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },

    /// Every model of the search failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Data { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<sugsvarsel::Error> for CliError {
    fn from(e: sugsvarsel::Error) -> Self {
        use sugsvarsel::Error as E;
        match e {
            E::InvalidHyperparameter(_)
            | E::DimensionMismatch { .. }
            | E::InvalidArgument(_)
            | E::InvalidPartition(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
