use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv: {0}")]
    Csv(String),

    #[error("{message}, line {line}")]
    CsvRow { line: u64, message: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("invalid series for patient `{patient}`: {reason}")]
    Series { patient: String, reason: String },

    #[error("nodes too degenerate: {0}")]
    DegenerateNodes(String),

    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),

    #[error("eigensolver did not converge after {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid zone tables: {0}")]
    ZoneTables(String),

    #[error("trial {seed}: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
