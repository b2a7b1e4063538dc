use std::process::ExitCode;

use diffwalker::learning::TrainFailure;
use diffwalker::{Error, WatershedError};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SINGULAR: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Train(#[from] TrainFailure),
    #[error(transparent)]
    Watershed(#[from] WatershedError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Watershed(WatershedError::Unlabeled { .. }) => EXIT_VALIDATION,
            Self::Core(e)
            | Self::Train(TrainFailure { source: e, .. })
            | Self::Watershed(WatershedError::Invalid(e)) => core_exit_code(e),
        }
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("error: {self}");
        ExitCode::from(self.exit_code())
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularSystem { .. } | Error::NotPositiveDefinite { .. } => EXIT_SINGULAR,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::InvalidDimensions { .. }
        | Error::ShapeMismatch { .. }
        | Error::InvalidWeight { .. }
        | Error::InvalidSeeds(_)
        | Error::InvalidArgument(_) => EXIT_VALIDATION,
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_failure_class_has_its_own_code() {
        let cases = [
            (CliError::Usage("x".into()), EXIT_VALIDATION),
            (Error::InvalidSeeds("x".into()).into(), EXIT_VALIDATION),
            (
                Error::SingularSystem {
                    vertex: 0,
                    row: 0,
                    col: 0,
                }
                .into(),
                EXIT_SINGULAR,
            ),
            (
                Error::NotConverged {
                    residual: 1.0,
                    iterations: 3,
                }
                .into(),
                EXIT_NOT_CONVERGED,
            ),
            (Error::Format("x".into()).into(), EXIT_IO),
            (Error::Io(std::io::Error::other("x")).into(), EXIT_IO),
        ];
        for (err, code) in cases {
            assert_eq!(err.exit_code(), code, "{err}");
        }
    }
}
