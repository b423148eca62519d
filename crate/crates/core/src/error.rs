use thiserror::Error;

/// Errors raised by the precoding chain and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("user index {index} out of range 1..={users}")]
    UserIndex { index: usize, users: usize },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("search space of {size} candidates exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
