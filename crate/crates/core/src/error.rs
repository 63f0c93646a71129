use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or incomplete configuration (missing defect series, unknown keys, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dipole selection rule violated: {0}")]
    SelectionRule(String),

    /// A fit or estimate whose data cannot identify the parameters.
    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("state space too large: {atoms} atoms exceeds the cap of {cap}")]
    Capacity { atoms: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
