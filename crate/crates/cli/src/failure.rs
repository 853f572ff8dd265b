//! Process exit codes: 0 success, 2 config or input validation, 3 I/O,
//! 4 numerical failure.

use std::fmt;

use leoint::Error;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const NUMERICAL: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: Self::IO,
            message: message.into(),
        }
    }

    /// Prefixes the message with context, keeping the code.
    pub fn context(self, ctx: impl fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{ctx}: {}", self.message),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn code_of(e: &Error) -> u8 {
    match e {
        Error::Io(_) => Failure::IO,
        Error::Csv(c) if c.is_io_error() => Failure::IO,
        Error::Json(j) if j.is_io() => Failure::IO,
        Error::SingularGeometry { .. } | Error::NonConvergence { .. } | Error::NegativeVariance(_) => {
            Failure::NUMERICAL
        }
        Error::Trial { source, .. } => code_of(source),
        _ => Failure::CONFIG,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: code_of(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
