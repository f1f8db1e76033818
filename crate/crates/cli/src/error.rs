use serde_json::json;

use crate::config::FORMAT_VERSION;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, flags or parameters.
    Validation(String),
    /// A solver failed on valid input.
    Numerical(fwpath::Error),
    Io(String),
    /// The run finished but checks failed; names the failing criteria.
    Criteria(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::Criteria(_) => "criterion",
        }
    }

    /// Machine-readable record of the failure.
    pub fn record(&self) -> serde_json::Value {
        let mut v = json!({
            "format_version": FORMAT_VERSION,
            "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() },
        });
        if let CliError::Criteria(names) = self {
            v["error"]["failed"] = json!(names);
        }
        v
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Criteria(names) => write!(f, "failed: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fwpath::Error> for CliError {
    fn from(e: fwpath::Error) -> Self {
        match e {
            fwpath::Error::Config(m) => CliError::Validation(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
