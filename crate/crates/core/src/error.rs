use std::path::PathBuf;

use crate::model::{ProgramId, StudentId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Hard failures: malformed inputs, violated invariants, I/O.
///
/// Metric values that are merely undefined for a program (no applicants in a
/// group, nobody admitted) are not errors; see [`crate::metrics::Undefined`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("student {student} has no score for component `{component}`")]
    MissingComponent { student: StudentId, component: String },

    #[error("program {0} is not registered")]
    UnknownProgram(ProgramId),

    #[error("duplicate student id {0}")]
    DuplicateStudent(StudentId),

    #[error("duplicate program id {0}")]
    DuplicateProgram(ProgramId),

    #[error("student {student}: {reason}")]
    InvalidStudent { student: StudentId, reason: String },

    #[error("program {program}: {reason}")]
    InvalidProgram { program: ProgramId, reason: String },

    #[error("invalid bonus policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible run: {0}")]
    Infeasible(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
