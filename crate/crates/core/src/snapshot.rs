//! Balance databases reconstructed from a transaction log.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::ledger::{Address, CurrencyId, SimulationLog, Source, TransactionRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(Address, Amount)", into = "(Address, Amount)")]
pub struct AccountBalance {
    pub address: Address,
    /// Common-currency units.
    pub balance: Amount,
}

impl AccountBalance {
    pub fn new(address: Address, balance: Amount) -> Self {
        Self { address, balance }
    }

    fn key(&self) -> (Amount, Address) {
        (self.balance, self.address)
    }
}

impl From<(Address, Amount)> for AccountBalance {
    fn from((address, balance): (Address, Amount)) -> Self {
        Self { address, balance }
    }
}

impl From<AccountBalance> for (Address, Amount) {
    fn from(a: AccountBalance) -> Self {
        (a.address, a.balance)
    }
}

/// Non-zero accounts of one currency, ascending by `(balance, address)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrencyDb {
    pub currency: CurrencyId,
    pub accounts: Vec<AccountBalance>,
}

impl CurrencyDb {
    /// Builds a database from unsorted balances, dropping zeros.
    pub fn from_balances(
        currency: CurrencyId,
        balances: impl IntoIterator<Item = AccountBalance>,
    ) -> Self {
        let mut accounts: Vec<_> = balances
            .into_iter()
            .filter(|a| a.balance.is_positive())
            .collect();
        accounts.sort_by_key(AccountBalance::key);
        Self { currency, accounts }
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn balance_of(&self, address: Address) -> Option<Amount> {
        self.accounts
            .iter()
            .find(|a| a.address == address)
            .map(|a| a.balance)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::InvalidSnapshot(format!(
                "currency {}: {msg}",
                self.currency
            )))
        };
        if self.accounts.iter().any(|a| !a.balance.is_positive()) {
            return bad("non-positive balance");
        }
        if self.accounts.windows(2).any(|w| w[0].key() >= w[1].key()) {
            return bad("accounts not sorted by (balance, address)");
        }
        let mut seen: Vec<_> = self.accounts.iter().map(|a| a.address).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate address");
        }
        Ok(())
    }
}

/// Per-currency databases at a point in time, smallest database first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: u32,
    pub dbs: Vec<CurrencyDb>,
}

impl Snapshot {
    pub fn new(time: u32, mut dbs: Vec<CurrencyDb>) -> Self {
        dbs.sort_by_key(|db| (db.len(), db.currency));
        Self { time, dbs }
    }

    pub fn db(&self, currency: CurrencyId) -> Option<&CurrencyDb> {
        self.dbs.iter().find(|db| db.currency == currency)
    }

    pub fn currencies(&self) -> Vec<CurrencyId> {
        self.dbs.iter().map(|db| db.currency).collect()
    }

    /// Restriction to the given currencies, re-ordered by size.
    pub fn restrict(&self, currencies: &[CurrencyId]) -> Result<Snapshot> {
        let dbs = currencies
            .iter()
            .map(|&c| self.db(c).cloned().ok_or(Error::UnknownCurrency(c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot::new(self.time, dbs))
    }

    pub fn validate(&self) -> Result<()> {
        for db in &self.dbs {
            db.check()?;
        }
        if self
            .dbs
            .windows(2)
            .any(|w| (w[0].len(), w[0].currency) >= (w[1].len(), w[1].currency))
        {
            return Err(Error::InvalidSnapshot(
                "databases not ordered by (account count, currency)".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        snap.validate()?;
        Ok(snap)
    }
}

/// Common-currency rate per currency; also the set of known currencies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRates {
    pub rates: BTreeMap<CurrencyId, Amount>,
}

impl ExchangeRates {
    /// Rate 1 for every listed currency.
    pub fn unit(currencies: impl IntoIterator<Item = CurrencyId>) -> Self {
        Self {
            rates: currencies.into_iter().map(|c| (c, Amount::ONE)).collect(),
        }
    }

    pub fn from_log(log: &SimulationLog) -> Self {
        Self {
            rates: log
                .config
                .currencies
                .iter()
                .map(|c| (c.currency_id, c.exchange_rate))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rates: ExchangeRates = serde_json::from_str(text)?;
        if let Some((c, _)) = rates.rates.iter().find(|(_, r)| !r.is_positive()) {
            return Err(Error::InvalidConfig(format!(
                "exchange rate of currency {c} must be > 0"
            )));
        }
        Ok(rates)
    }
}

/// Native balance converted to common-currency units.
pub fn convert_common(balance: Amount, rate: Amount) -> Result<Amount> {
    if !rate.is_positive() {
        return Err(Error::InvalidConfig("exchange rate must be > 0".into()));
    }
    balance.checked_mul(rate)
}

#[derive(Default)]
struct Ledger {
    balances: HashMap<Address, Amount>,
    minted: Amount,
}

impl Ledger {
    fn credit(&mut self, address: Address, amount: Amount) -> Result<()> {
        let slot = self.balances.entry(address).or_default();
        *slot = slot.checked_add(amount)?;
        Ok(())
    }

    fn total(&self) -> Result<Amount> {
        self.balances
            .values()
            .try_fold(Amount::ZERO, |acc, &b| acc.checked_add(b))
    }
}

/// Incremental replay of records in log order.
///
/// Fees collected during a `(turn, currency)` group are credited to the
/// destination of the group's final record, which must be the miner's
/// `Mint` whenever fees were paid.
pub struct Replayer {
    time: u32,
    rates: ExchangeRates,
    ledgers: BTreeMap<CurrencyId, Ledger>,
    group: Option<(u32, CurrencyId)>,
    fee_pool: Amount,
    last: Option<TransactionRecord>,
}

impl Replayer {
    /// Replays records with `turn < time` against the known currencies.
    pub fn new(rates: ExchangeRates, time: u32) -> Self {
        let ledgers = rates
            .rates
            .keys()
            .map(|&c| (c, Ledger::default()))
            .collect();
        Self {
            time,
            rates,
            ledgers,
            group: None,
            fee_pool: Amount::ZERO,
            last: None,
        }
    }

    pub fn apply(&mut self, record: &TransactionRecord) -> Result<()> {
        if !self.ledgers.contains_key(&record.currency) {
            return Err(Error::UnknownCurrency(record.currency));
        }
        if record.amount.is_negative() || record.fee.is_negative() {
            return Err(Error::CorruptLog("negative amount".into()));
        }
        let key = (record.turn, record.currency);
        if let Some(current) = self.group {
            if key < current {
                return Err(Error::CorruptLog(format!(
                    "record for turn {} currency {} is out of order",
                    record.turn, record.currency
                )));
            }
            if key != current {
                self.settle()?;
            }
        }
        if record.turn >= self.time {
            return Ok(());
        }
        self.group = Some(key);
        let ledger = self
            .ledgers
            .get_mut(&record.currency)
            .expect("checked above");
        match record.source {
            Source::Mint => {
                if !record.fee.is_zero() {
                    return Err(Error::CorruptLog("mint record carries a fee".into()));
                }
                ledger.minted = ledger.minted.checked_add(record.amount)?;
            }
            Source::Account(src) => {
                if src == record.destination {
                    return Err(Error::CorruptLog(format!("self-transfer by address {src}")));
                }
                let debit = record.amount.checked_add(record.fee)?;
                let have = ledger.balances.get(&src).copied().unwrap_or_default();
                if debit > have {
                    return Err(Error::CorruptLog(format!(
                        "turn {}: address {src} in currency {} sends {debit} but holds {have}",
                        record.turn, record.currency
                    )));
                }
                ledger.balances.insert(src, have.checked_sub(debit)?);
                self.fee_pool = self.fee_pool.checked_add(record.fee)?;
            }
        }
        ledger.credit(record.destination, record.amount)?;
        self.last = Some(*record);
        Ok(())
    }

    /// Closes the current `(turn, currency)` group, paying out its fees.
    pub fn settle(&mut self) -> Result<()> {
        if let Some((turn, currency)) = self.group.take() {
            if self.fee_pool.is_positive() {
                let miner = match self.last {
                    Some(r) if r.is_mint() => r.destination,
                    _ => {
                        return Err(Error::CorruptLog(format!(
                            "turn {turn} currency {currency}: fees paid but no miner record"
                        )))
                    }
                };
                let ledger = self
                    .ledgers
                    .get_mut(&currency)
                    .expect("group currency is known");
                ledger.credit(miner, self.fee_pool)?;
            }
        }
        self.fee_pool = Amount::ZERO;
        self.last = None;
        Ok(())
    }

    /// Settles, then returns `(native balance total, minted total)` per currency.
    pub fn totals(&mut self) -> Result<Vec<(CurrencyId, Amount, Amount)>> {
        self.settle()?;
        self.ledgers
            .iter()
            .map(|(&c, l)| Ok((c, l.total()?, l.minted)))
            .collect()
    }

    pub fn native_balance(&self, currency: CurrencyId, address: Address) -> Option<Amount> {
        self.ledgers.get(&currency)?.balances.get(&address).copied()
    }

    pub fn finish(mut self) -> Result<Snapshot> {
        self.settle()?;
        let mut dbs = Vec::with_capacity(self.ledgers.len());
        for (currency, ledger) in &self.ledgers {
            let rate = self.rates.rates[currency];
            let accounts = ledger
                .balances
                .iter()
                .map(|(&address, &native)| {
                    Ok(AccountBalance::new(address, convert_common(native, rate)?))
                })
                .collect::<Result<Vec<_>>>()?;
            dbs.push(CurrencyDb::from_balances(*currency, accounts));
        }
        Ok(Snapshot::new(self.time, dbs))
    }
}

/// Replays a log into a snapshot at time `t`.
pub fn replay_records<'a>(
    records: impl IntoIterator<Item = &'a TransactionRecord>,
    time: u32,
    rates: &ExchangeRates,
) -> Result<Snapshot> {
    let mut replayer = Replayer::new(rates.clone(), time);
    for record in records {
        replayer.apply(record)?;
    }
    replayer.finish()
}

/// Replays a simulation log at time `t` with the given rates, or the
/// configured ones when `rates` is `None`.
pub fn replay(log: &SimulationLog, time: u32, rates: Option<&ExchangeRates>) -> Result<Snapshot> {
    if time > log.config.turns {
        return Err(Error::TimeOutOfRange {
            time,
            turns: log.config.turns,
        });
    }
    let configured;
    let rates = match rates {
        Some(r) => r,
        None => {
            configured = ExchangeRates::from_log(log);
            &configured
        }
    };
    replay_records(&log.records, time, rates)
}
