use thiserror::Error;

use crate::ledger::CurrencyId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fixed-point overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("currency {currency} has no accounts at turn 0")]
    EmptyWorld { currency: CurrencyId },
    #[error("record references unknown currency {0}")]
    UnknownCurrency(CurrencyId),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("snapshot time {time} is past the last turn {turns}")]
    TimeOutOfRange { time: u32, turns: u32 },
    #[error("candidate tuple has zero total balance")]
    InvalidCandidate,
    #[error("pivot allocation is zero")]
    PivotRatioZero,
    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),
    #[error("portfolio does not match snapshot: {0}")]
    PortfolioMismatch(String),
    #[error("search space of {size} tuples exceeds the limit of {limit}")]
    ProductLimit { size: u128, limit: u128 },
    #[error("scorer disagreement: {0}")]
    ScorerMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
