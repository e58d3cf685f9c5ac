#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ratiotrace::amount::SCALE;
use ratiotrace::finder::binary_find;
use ratiotrace::ledger::{CurrencyConfig, CurrencyId, FractionDistribution, SimConfig};
use ratiotrace::{AccountBalance, Amount, CurrencyDb, Portfolio, Snapshot};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn amt(s: &str) -> Amount {
    s.parse().unwrap()
}

/// The seven-account list used throughout, addresses 1..=7.
pub fn seven_accounts() -> Vec<AccountBalance> {
    ["1.23", "3.78", "6.0", "6.0", "7.13", "8.2", "12.6"]
        .iter()
        .enumerate()
        .map(|(i, b)| AccountBalance::new(i as u64 + 1, amt(b)))
        .collect()
}

pub fn addresses(found: &[AccountBalance]) -> Vec<u64> {
    found.iter().map(|a| a.address).collect()
}

/// Straight scan over the list with the same contract as `binary_find`.
pub fn linear_find(accounts: &[AccountBalance], target: Amount) -> Vec<AccountBalance> {
    let exact: Vec<_> = accounts
        .iter()
        .filter(|a| a.balance == target)
        .copied()
        .collect();
    if !exact.is_empty() {
        return exact;
    }
    let below = accounts
        .iter()
        .map(|a| a.balance)
        .filter(|&b| b < target)
        .max();
    let above = accounts
        .iter()
        .map(|a| a.balance)
        .filter(|&b| b > target)
        .min();
    match (below, above) {
        (Some(lo), Some(hi)) => accounts
            .iter()
            .filter(|a| a.balance == lo || a.balance == hi)
            .copied()
            .collect(),
        _ => Vec::new(),
    }
}

/// Uniform balance in `(0, max_units]` with full fixed-point resolution.
pub fn random_balance(rng: &mut ChaCha8Rng, max_units: i64) -> Amount {
    Amount::from_raw(rng.gen_range(1..=max_units * SCALE))
}

pub fn random_db(rng: &mut ChaCha8Rng, currency: u16, n: usize, max_units: i64) -> CurrencyDb {
    CurrencyDb::from_balances(
        CurrencyId(currency),
        (0..n).map(|i| AccountBalance::new(i as u64, random_balance(rng, max_units))),
    )
}

/// Shares proportional to random integer weights.
pub fn random_portfolio(rng: &mut ChaCha8Rng, currencies: &[CurrencyId]) -> Portfolio {
    let holdings: Vec<_> = currencies
        .iter()
        .map(|&c| (c, Amount::from_int(rng.gen_range(1..=100)).unwrap()))
        .collect();
    Portfolio::from_holdings(&holdings).unwrap()
}

pub fn random_snapshot(rng: &mut ChaCha8Rng, m: usize, max_n: usize) -> Snapshot {
    let dbs = (1..=m as u16)
        .map(|c| {
            let n = rng.gen_range(1..=max_n);
            random_db(rng, c, n, 1000)
        })
        .collect();
    Snapshot::new(0, dbs)
}

/// Five currencies with distinct acquisition lines, fees and rewards.
pub fn case_study_sim(turns: u32, seed: u64) -> SimConfig {
    let rows = [
        ("0.001", "1", "0.001", "5"),
        ("0.0015", "1.2", "0.002", "8"),
        ("0.002", "1.1", "0.005", "3"),
        ("0.0025", "1.3", "0.0015", "12"),
        ("0.003", "1.5", "0.003", "6"),
    ];
    SimConfig {
        currencies: rows
            .iter()
            .enumerate()
            .map(|(i, &(b1, b0, fee, reward))| CurrencyConfig {
                currency_id: CurrencyId(i as u16 + 1),
                beta1: amt(b1),
                beta0: amt(b0),
                miner_fee_rate: amt(fee),
                miner_reward: amt(reward),
                initial_endowment: amt("10"),
                exchange_rate: Amount::ONE,
            })
            .collect(),
        turns,
        transactions_per_user_per_turn: 1,
        seed,
        transfer_fraction: FractionDistribution::Uniform,
    }
}

/// A random valid world for conservation checks.
pub fn random_sim(rng: &mut ChaCha8Rng) -> SimConfig {
    let m = rng.gen_range(1..=4);
    SimConfig {
        currencies: (1..=m)
            .map(|c| CurrencyConfig {
                currency_id: CurrencyId(c),
                beta1: Amount::from_raw(rng.gen_range(0..=SCALE / 2)),
                beta0: Amount::from_raw(rng.gen_range(SCALE..=4 * SCALE)),
                miner_fee_rate: Amount::from_raw(rng.gen_range(0..=SCALE / 10)),
                miner_reward: Amount::from_raw(rng.gen_range(0..=20 * SCALE)),
                initial_endowment: Amount::from_raw(rng.gen_range(1..=50 * SCALE)),
                exchange_rate: Amount::ONE,
            })
            .collect(),
        turns: rng.gen_range(1..=40),
        transactions_per_user_per_turn: rng.gen_range(1..=3),
        seed: rng.gen(),
        transfer_fraction: FractionDistribution::Uniform,
    }
}

pub fn bracket_contains(db: &CurrencyDb, target: Amount, address: u64) -> bool {
    binary_find(&db.accounts, target)
        .iter()
        .any(|a| a.address == address)
}
