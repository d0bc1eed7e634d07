use std::io;
use std::path::PathBuf;

/// Errors produced anywhere in the optimization stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty pool")]
    EmptyPool,
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("unknown example id {0:?}")]
    UnknownId(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("ill-conditioned kernel matrix")]
    IllConditioned,
    #[error("search space exhausted")]
    SearchExhausted,
    #[error("evaluation of subset [{}] failed: {source}", subset_ids.join(","))]
    Evaluation {
        subset_ids: Vec<String>,
        #[source]
        source: Box<Error>,
    },
    #[error("no correct examples generated at round {0}")]
    NoCorrectExamples(usize),
    #[error("backend request {request_id} timed out after {timeout_ms} ms")]
    Timeout { request_id: u64, timeout_ms: u64 },
    #[error("malformed backend response: {line:?} ({reason})")]
    MalformedResponse { line: String, reason: String },
    #[error("backend process exited ({status}): {stderr}")]
    ChildExited { status: String, stderr: String },
    #[error("backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
