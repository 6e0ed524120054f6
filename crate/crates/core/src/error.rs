use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} variables, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("degree mismatch: expected {expected}, got {got}")]
    Degree { expected: u32, got: u32 },

    #[error("term of degree {got} in a homogeneous polynomial of degree {expected}")]
    NotHomogeneous { expected: u32, got: u32 },

    #[error("matrix is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("the zero system is not accepted here")]
    ZeroSystem,

    #[error("jacobian is rank deficient")]
    RankDeficient,

    #[error("point is not on the unit sphere (norm {0})")]
    NotUnit(f64),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("boundary degree {k} out of range 1..={max}")]
    BoundaryDegree { k: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("invalid options: {0}")]
    Options(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { location: location.into(), message: message.into() }
    }
}
