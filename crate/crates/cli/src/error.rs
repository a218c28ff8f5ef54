use std::io;

use netsig_core::Error;

/// Exit codes, also printed by `--help`.
pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (bad flag or value)
  3  missing input (config, manifest or upstream artifact)
  4  schema violation (malformed config, manifest, dataset, model or record)
  5  invalid parameter or config value
  6  computation failure (sampling or numerical)
  7  other I/O failure

On failure one JSON line {\"error\":{\"code\":..,\"kind\":..,\"message\":..}} is written to stderr.
Set NETSIG_LOG (error, warn, info, debug, trace) for logging.";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingInput(String),
    Schema(String),
    Config(String),
    Core(Error),
}

impl CliError {
    pub fn missing(message: impl Into<String>) -> Self {
        CliError::MissingInput(message.into())
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Config(_) => 5,
            CliError::Core(e) => match e {
                Error::Io(io) if io.kind() == io::ErrorKind::NotFound => 3,
                Error::Parse { .. } | Error::Schema { .. } | Error::Json(_) | Error::Csv(_) => 4,
                Error::InvalidParameter(_)
                | Error::InvalidNodes(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptyInput
                | Error::EmptyGraph => 5,
                Error::Sampling(_) | Error::Numerical(_) => 6,
                Error::Io(_) => 7,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.code() {
            2 => "usage",
            3 => "missing_input",
            4 => "schema",
            5 => "invalid_parameter",
            6 => "computation",
            _ => "io",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::MissingInput(m) | CliError::Schema(m) | CliError::Config(m) => {
                m.clone()
            }
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn json_line(&self) -> String {
        serde_json::json!({
            "error": { "code": self.code(), "kind": self.kind(), "message": self.message() }
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}
