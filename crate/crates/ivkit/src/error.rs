use thiserror::Error;

pub type Result<T> = std::result::Result<T, IvError>;

#[derive(Debug, Error)]
pub enum IvError {
    /// Bad user input: unknown column, inconsistent flags, invalid option.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Rank deficiency or other violation of the design assumptions.
    #[error("design error: {0}")]
    Design(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("weak instrument: {0}")]
    WeakInstrument(String),

    #[error("search limit reached: {0}")]
    SearchLimit(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl IvError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            IvError::Config(_) => 2,
            _ => 1,
        }
    }
}
