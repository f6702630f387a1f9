//! CLI error type with the documented exit-code mapping: 1 for usage and
//! input problems, 2 for protocol aborts, 3 for a verification timeout.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Protocol(String),
    Timeout,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Protocol(_) => 2,
            CliError::Timeout => 3,
        }
    }

    pub fn usage(err: impl fmt::Display) -> CliError {
        CliError::Usage(err.to_string())
    }

    pub fn protocol(err: impl fmt::Display) -> CliError {
        CliError::Protocol(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Protocol(msg) => write!(f, "protocol: {msg}"),
            CliError::Timeout => write!(f, "verification timed out"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<hwpv::session::SessionError> for CliError {
    fn from(err: hwpv::session::SessionError) -> Self {
        CliError::Protocol(err.to_string())
    }
}

impl From<hwpv::transport::TransportError> for CliError {
    fn from(err: hwpv::transport::TransportError) -> Self {
        CliError::Protocol(err.to_string())
    }
}
