use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A certified comparison could not be decided at the precision cap.
    #[error("precision exhausted at {bits} bits: {context}")]
    PrecisionExhausted { context: String, bits: u32 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },

    /// The tilt matrix is identically zero, so the neighbourhood constant is undefined.
    #[error("degenerate tilt: the tilt matrix is zero")]
    DegenerateTilt,

    /// A rational resonance produced an exactly vanishing product.
    #[error("zero product at j = {j:?} (rational resonance)")]
    ZeroProduct { j: Vec<i64> },

    #[error("enumeration budget exceeded: {needed} > {budget} ({context})")]
    BudgetExceeded {
        needed: u128,
        budget: u128,
        context: String,
    },

    /// The linear-forms search ran out of budget. This is never a claim of nonexistence.
    #[error("solver incomplete: {0}")]
    SolverIncomplete(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code: 1 verification failure, 2 config error, 3 exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PrecisionExhausted { .. } | Error::BudgetExceeded { .. } | Error::SolverIncomplete(_) => 3,
            Error::ReplayMismatch(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn precision(context: impl Into<String>, bits: u32) -> Self {
        Error::PrecisionExhausted {
            context: context.into(),
            bits,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
