use std::fmt;

use nbprune::{Error, ErrorKind};

/// A command failure carrying its exit-code category. Rendered as a single
/// line starting with a greppable code.
#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Argument,
    Format,
    Guard,
    /// A verification check found violations.
    Check,
}

impl From<ErrorKind> for Code {
    fn from(kind: ErrorKind) -> Self {
        match kind {
            ErrorKind::Argument => Code::Argument,
            ErrorKind::Format => Code::Format,
            ErrorKind::Guard => Code::Guard,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn arg(message: impl Into<String>) -> Self {
        Self {
            code: Code::Argument,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self {
            code: Code::Format,
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: Code::Check,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.code {
            Code::Check => 1,
            Code::Argument => 2,
            Code::Format => 3,
            Code::Guard => 4,
        }
    }

    fn prefix(&self) -> &'static str {
        match self.code {
            Code::Check => "E_CHECK",
            Code::Argument => "E_ARG",
            Code::Format => "E_FORMAT",
            Code::Guard => "E_GUARD",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "{}: {}", self.prefix(), flat.join(" "))
    }
}

/// Attaches the flag (or other origin) that led to a library error.
/// Unreadable or unwritable paths are treated as bad arguments.
pub trait Context<T> {
    fn context(self, origin: &str) -> CliResult<T>;
}

impl<T> Context<T> for nbprune::Result<T> {
    fn context(self, origin: &str) -> CliResult<T> {
        self.map_err(|e| {
            let code = match e {
                Error::Io { .. } => Code::Argument,
                ref other => other.kind().into(),
            };
            Failure {
                code,
                message: format!("{origin}: {e}"),
            }
        })
    }
}

/// Parses a flag value with the library's `FromStr`, naming the flag on
/// failure.
pub fn parse_flag<T>(flag: &str, value: &str) -> CliResult<T>
where
    T: std::str::FromStr<Err = Error>,
{
    value.parse().map_err(|e: Error| Failure::arg(format!("{flag}: {e}")))
}
