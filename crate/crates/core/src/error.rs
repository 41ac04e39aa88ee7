use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("conditioning value {0} has zero probability")]
    ZeroProbability(u64),

    #[error("series shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("logarithm of a series with nonpositive constant term {0}")]
    NonPositiveConstant(f64),

    #[error("enumeration budget exceeded: {cells} lattice cells > {budget}")]
    BudgetExceeded { cells: usize, budget: usize },

    #[error("times must be strictly increasing")]
    UnsortedTimes,

    #[error("infeasible MISTI parameters: {0}")]
    Infeasible(String),

    #[error("degenerate variance; correlation undefined")]
    DegenerateVariance,

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
