use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A record violated a dataset invariant. `row` is 1-based over data rows.
    Data { stream: &'static str, row: usize, msg: String },
    /// Configuration or argument outside its valid domain.
    Invalid(String),
    /// Input or parameter dimensions do not agree.
    Dimension { expected: usize, found: usize, what: &'static str },
    /// Differentiation engine fault (domain error, non-finite value, foreign var).
    Autodiff(String),
    /// A loss or prediction became non-finite.
    NonFinite(String),
    /// Not enough data (or command history) for the requested operation.
    Insufficient(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Data { stream, row, msg } => write!(f, "{stream} row {row}: {msg}"),
            Error::Invalid(m) => write!(f, "invalid argument: {m}"),
            Error::Dimension { expected, found, what } => {
                write!(f, "{what}: expected dimension {expected}, found {found}")
            }
            Error::Autodiff(m) => write!(f, "autodiff: {m}"),
            Error::NonFinite(m) => write!(f, "non-finite value: {m}"),
            Error::Insufficient(m) => write!(f, "insufficient data: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::Invalid(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
