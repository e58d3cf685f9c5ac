//! Logical multi-currency ledger: configuration, records and the turn-based
//! simulator that produces them.

mod config;
pub mod logfile;
mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{CurrencyConfig, FractionDistribution, SimConfig};
pub use sim::{new_users_at, simulate, simulate_into};

use crate::amount::Amount;

/// Dense 1-based currency index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurrencyId(pub u16);

impl fmt::Display for CurrencyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Address within one currency, assigned sequentially from 0.
pub type Address = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId {
    pub currency: CurrencyId,
    pub address: Address,
}

/// Where the value of a record comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    /// Newly created value: account endowments and miner rewards.
    Mint,
    Account(Address),
}

/// One value movement inside a single currency.
///
/// `fee` is debited from the source on top of `amount` and credited to the
/// miner of the same turn, whose reward is the last `Mint` record emitted
/// for that `(turn, currency)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransactionRecord {
    pub turn: u32,
    pub currency: CurrencyId,
    pub source: Source,
    pub destination: Address,
    pub amount: Amount,
    pub fee: Amount,
}

impl TransactionRecord {
    pub fn is_mint(&self) -> bool {
        matches!(self.source, Source::Mint)
    }
}

/// A simulated user and the one account it owns in each currency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccounts {
    pub user: u64,
    pub accounts: Vec<AccountId>,
}

impl UserAccounts {
    pub fn address_in(&self, currency: CurrencyId) -> Option<Address> {
        self.accounts
            .iter()
            .find(|a| a.currency == currency)
            .map(|a| a.address)
    }
}

#[derive(Clone, Debug)]
pub struct SimulationLog {
    pub config: SimConfig,
    pub records: Vec<TransactionRecord>,
    /// Ground truth: users holding an account in every currency.
    pub users: Vec<UserAccounts>,
}
