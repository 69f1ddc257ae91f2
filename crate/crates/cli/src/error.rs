use std::fmt;

use momentmp::Error;

/// Failure categories, each with its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Data(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Data(_) => "data",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.category(), "message": self.message() }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category(), self.message())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e.root_cause() {
            Error::RejectedInput(_) => CliError::Config(message),
            Error::DegenerateMoments { .. }
            | Error::NumericalDegeneracy(_)
            | Error::SingularFisher(_)
            | Error::UnsupportedMoment(_) => CliError::Numerical(message),
            Error::Separation(_)
            | Error::RankDeficient(_)
            | Error::NonBinaryTarget(_)
            | Error::UndefinedConditional(_) => CliError::Data(message),
            Error::FoldDegenerate { .. } | Error::TrajectoryAborted { .. } => CliError::Numerical(message),
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

pub type CliResult<T> = std::result::Result<T, CliError>;
