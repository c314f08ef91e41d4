use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps `Domain`, `Input` and `Size` to exit code 2 and `Numeric`
/// to exit code 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("size limit exceeded: {what} = {value} (limit {limit})")]
    Size {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(format!($($arg)*))
    };
}
pub(crate) use domain_err;
