use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain size mismatch: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },

    #[error("sample count mismatch: {left} vs {right}")]
    SampleCountMismatch { left: u64, right: u64 },

    #[error("element {element} is outside the domain [1, {n}]")]
    OutOfRange { element: u64, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration needs {needed} outcomes, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("promise violated: {0}")]
    PromiseViolated(String),

    #[error("collision count overflows 64 bits")]
    Overflow,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
