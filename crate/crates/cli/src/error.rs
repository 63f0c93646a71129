use rydberg_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 1 i/o, 2 configuration, 3 numerical or degenerate.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Domain(_) | Error::SelectionRule(_) => 2,
                Error::Degenerate(_) | Error::Capacity { .. } | Error::Numerical(_) => 3,
            },
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}
