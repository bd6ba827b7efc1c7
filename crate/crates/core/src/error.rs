use thiserror::Error;

use crate::lpsolve::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),

    #[error("channel Gram matrix is singular; redraw the channel")]
    SingularChannel,

    #[error("exhaustive search needs {needed} candidates, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("{excluded} of {total} instances failed, above the 0.1% limit")]
    TooManyFailures { excluded: u64, total: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
