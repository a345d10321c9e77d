use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An argument violated its documented precondition. `name` is the
    /// offending field or parameter.
    InvalidArgument {
        name: &'static str,
        reason: &'static str,
        value: f64,
    },
    /// Switching accumulated too many toggles inside one dwell window.
    Chatter { t: f64, j: usize, toggles: usize },
    /// The steady-state window does not hold enough switching cycles.
    InsufficientData { cycles: usize, required: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str, value: f64) -> Self {
        Error::InvalidArgument {
            name,
            reason,
            value,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument {
                name,
                reason,
                value,
            } => {
                write!(f, "invalid {name}: {reason} (got {value})")
            }
            Error::Chatter { t, j, toggles } => write!(
                f,
                "chattering at t = {t:e} s on index {j}: {toggles} toggles inside one dwell window"
            ),
            Error::InsufficientData { cycles, required } => write!(
                f,
                "steady window holds {cycles} full switching cycles, need at least {required}"
            ),
        }
    }
}

impl core::error::Error for Error {}
