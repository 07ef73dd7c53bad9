use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid ground target: {0}")]
    InvalidTarget(String),
    #[error("pose outside the model domain: {0}")]
    Domain(String),
    #[error("target {index} (1-based) has no feasible waypoint: {reason}")]
    InfeasibleTarget { index: usize, reason: String },
    #[error("surrogate expansion point is infeasible: {0}")]
    InfeasibleSurrogate(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("route solver: {0}")]
    Route(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleTarget { .. } | Error::InfeasibleSurrogate(_) => 1,
            Error::Io { .. } | Error::Parse(_) | Error::Inconsistent(_) => 2,
            Error::Numerical(_) => 3,
            Error::InvalidCamera(_)
            | Error::InvalidTarget(_)
            | Error::Domain(_)
            | Error::InvalidProblem(_)
            | Error::Route(_) => 2,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
