use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants map onto the CLI exit codes: everything
/// that stems from malformed input exits 1, numerically undecidable outcomes
/// exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vertex index {index}, graph has {count} vertices")]
    InvalidVertex { index: usize, count: usize },

    #[error("invalid atom index {index}, space has {count} atoms")]
    InvalidAtom { index: usize, count: usize },

    #[error(
        "truncation boundary reached at depth {depth} from vertex {from}: \
         the preimage fiber of vertex {blocked} is incomplete"
    )]
    TruncationBoundary {
        from: usize,
        depth: usize,
        blocked: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{0}")]
    Input(String),

    #[error("weights of {what} sum to {sum:.17e}, expected 1 within {tol:.3e}")]
    NotProbability { what: String, sum: f64, tol: f64 },

    #[error("nonzero entry at zero-mass atom: {0}")]
    NullAtom(String),

    #[error("absolute continuity not verified before computing density table")]
    ConditionsNotVerified,

    #[error("rank detection ambiguous: normalized eigenvalue gap {gap:.3e} below {threshold:.3e}")]
    IndeterminateRank { gap: f64, threshold: f64 },

    #[error("not a Stieltjes moment sequence: {0}")]
    NotStieltjes(String),

    #[error("moment sequence too short for rank {rank}: need {needed} entries, have {available}")]
    InsufficientDepth {
        rank: usize,
        needed: usize,
        available: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IndeterminateRank { .. } | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}
