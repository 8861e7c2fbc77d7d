use thiserror::Error;

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    Input { path: String, msg: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("numerical abort: {context}{source}")]
    Numerical {
        context: String,
        source: foliflow_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 4,
            _ => 3,
        }
    }

    /// Wraps a library error, prefixing `context` to its message.
    pub fn core(context: impl Into<String>, e: foliflow_core::Error) -> Self {
        let context = context.into();
        match e {
            foliflow_core::Error::Config(m) => CliError::Config(format!("{context}{m}")),
            source => CliError::Numerical { context, source },
        }
    }
}

impl From<foliflow_core::Error> for CliError {
    fn from(e: foliflow_core::Error) -> Self {
        CliError::core("", e)
    }
}
