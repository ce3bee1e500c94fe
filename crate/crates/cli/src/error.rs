use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rotorlab_core::Error),
    #[error("validation failed: {0} check(s) did not pass")]
    Validation(usize),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    /// 1 = i/o, 2 = configuration, 3 = numerical failure, 4 = failed validation.
    pub fn code(&self) -> u8 {
        use rotorlab_core::Error as E;
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match root(e) {
                E::InvalidParam { .. }
                | E::OffGrid { .. }
                | E::Fraction(_)
                | E::DenseCap { .. } => 2,
                _ => 3,
            },
            CliError::Validation(_) => 4,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

fn root(e: &rotorlab_core::Error) -> &rotorlab_core::Error {
    match e {
        rotorlab_core::Error::Realization { source, .. } => root(source),
        other => other,
    }
}
