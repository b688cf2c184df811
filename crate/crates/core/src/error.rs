use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot remove an observation from an empty cluster state")]
    Underflow,

    /// `nu * S` collapsed to (or below) zero for the given variable.
    #[error("numerical degeneracy in variable {variable}: nu*S = {nu_s:e} (t = {t:e})")]
    Degenerate { variable: usize, nu_s: f64, t: f64 },

    #[error("degenerate sufficient statistics in cluster {cluster}, variable {variable}")]
    DegenerateCluster { cluster: usize, variable: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("allocation weights underflowed to zero")]
    WeightUnderflow,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("at ordering position {position}: {source}")]
    AtPosition {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model set is empty")]
    EmptyModelSet,
}

impl Error {
    pub(crate) fn at_position(self, position: usize) -> Self {
        Error::AtPosition {
            position,
            source: Box::new(self),
        }
    }
}
