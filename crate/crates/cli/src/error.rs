use gyrolev::pipeline::PipelineError;
use gyrolev::signal::SignalError;
use thiserror::Error;

/// Failures grouped by exit code: 2 config, 3 I/O, 4 analysis.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Io { .. } | SignalError::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Signal(s) => s.into(),
            PipelineError::InvalidSettings(_) | PipelineError::Param(_) => CliError::Config(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}
