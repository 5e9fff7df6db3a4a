use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible.
    Dimension(String),
    /// An argument is outside the operation's domain (empty list, k > M, ...).
    Argument(String),
    /// A configuration value is invalid.
    Config(String),
    /// An operation was applied to the wrong kind of object
    /// (e.g. a continuous sweep on a discrete-control model).
    Usage(String),
    /// A non-finite value appeared.
    Numerical(String),
    /// Training diverged.
    Divergence { epoch: usize, batch: usize, loss: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Argument(msg) => write!(f, "argument error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Divergence { epoch, batch, loss } => {
                write!(f, "training diverged at epoch {epoch}, batch {batch} (loss = {loss})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(alloc::format!($($arg)*)) };
}
macro_rules! arg_err {
    ($($arg:tt)*) => { $crate::error::Error::Argument(alloc::format!($($arg)*)) };
}
macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! usage_err {
    ($($arg:tt)*) => { $crate::error::Error::Usage(alloc::format!($($arg)*)) };
}
pub(crate) use {arg_err, config_err, dim_err, usage_err};
