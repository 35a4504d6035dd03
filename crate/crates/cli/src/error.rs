use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] chirpsep::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use chirpsep::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidArgument(_)) => 2,
            CliError::Io(_) | CliError::Core(E::Io(_)) | CliError::Core(E::Format(_)) => 3,
            CliError::Core(E::Numerical(_)) => 4,
        }
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}
