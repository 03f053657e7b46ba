use thiserror::Error;

/// Errors raised by the library. Each variant belongs to one of four
/// families which the command line maps onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mathematical precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient p-adic precision: {0}")]
    InsufficientPrecision(String),

    #[error("search bound exhausted: {0}")]
    BoundExhausted(String),

    /// Two routes that must agree did not. Always an implementation bug.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

impl Error {
    /// Process exit code for this error family.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            Error::Precondition(_) => 2,
            Error::InsufficientPrecision(_) => 3,
            Error::BoundExhausted(_) => 4,
            Error::Inconsistency(_) => 70,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! precondition {
    ($($arg:tt)*) => { $crate::error::Error::Precondition(format!($($arg)*)) };
}
pub(crate) use precondition;
