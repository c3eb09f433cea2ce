use std::fmt;

/// Errors that end the process with status 2.
#[derive(Debug)]
pub enum CliError {
    /// A flag or config value fails validation.
    Flag {
        flag: String,
        msg: String,
    },
    Core(nullrec_core::Error),
    Other(String),
}

impl CliError {
    pub fn flag(flag: &str, msg: impl Into<String>) -> Self {
        CliError::Flag {
            flag: flag.to_string(),
            msg: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Flag { flag, msg } => write!(f, "invalid value for {flag}: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Other(msg) => f.write_str(msg),
        }
    }
}

impl From<nullrec_core::Error> for CliError {
    fn from(e: nullrec_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}
