//! Multi-currency ledger simulation and portfolio-ratio account matching.
//!
//! The pipeline is: [`ledger::simulate`] produces a transaction log,
//! [`snapshot::replay`] rebuilds per-currency balance databases at a point
//! in time, and [`finder::find_accounts`] searches those databases for the
//! account tuple whose balance shares best match a known portfolio.
//! [`oracle`] is the exhaustive baseline and [`experiment`] the sweep harness.

pub mod amount;
pub mod error;
pub mod experiment;
pub mod finder;
pub mod ledger;
pub mod oracle;
pub mod snapshot;

pub use amount::Amount;
pub use error::{Error, Result};
pub use finder::{
    binary_find, find_accounts, normalized_score, score, target_balance, AnswerTuple,
    FinderOutcome, FinderParams, Portfolio,
};
pub use ledger::{simulate, CurrencyConfig, CurrencyId, SimConfig, SimulationLog};
pub use oracle::{exhaustive_best, OracleResult};
pub use snapshot::{convert_common, replay, AccountBalance, CurrencyDb, ExchangeRates, Snapshot};
