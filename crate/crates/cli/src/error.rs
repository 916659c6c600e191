use thiserror::Error;

/// A failed command. The exit code distinguishes bad input from numerics.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Numeric(_) => "numeric",
        }
    }
}

impl From<gradmatch::Error> for CliError {
    fn from(e: gradmatch::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<gradmatch::TrainError> for CliError {
    fn from(e: gradmatch::TrainError) -> Self {
        match e {
            gradmatch::TrainError::Setup(inner) => inner.into(),
            diverged => CliError::Numeric(diverged.to_string()),
        }
    }
}
