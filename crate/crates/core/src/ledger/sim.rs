use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    AccountId, CurrencyConfig, FractionDistribution, SimConfig, SimulationLog, Source,
    TransactionRecord, UserAccounts,
};
use crate::amount::{Amount, SCALE};
use crate::error::Result;

/// Users acquired by a currency at turn `t`: `floor(beta1 * t + beta0)`.
pub fn new_users_at(config: &CurrencyConfig, t: u32) -> u64 {
    let raw = config.beta1.raw() as i128 * t as i128 + config.beta0.raw() as i128;
    (raw.max(0) / SCALE as i128) as u64
}

/// Runs the simulation and collects the full log in memory.
pub fn simulate(config: &SimConfig) -> Result<SimulationLog> {
    let mut records = Vec::new();
    let users = simulate_into(config, |r| {
        records.push(*r);
        Ok(())
    })?;
    Ok(SimulationLog {
        config: config.clone(),
        records,
        users,
    })
}

/// Runs the simulation, streaming each record to `sink` in log order.
///
/// Per turn, every currency acquires `new_users_at` accounts. The number of
/// users acquired by all currencies alike (the minimum over currencies) are
/// created as shared users with one account in every currency; any surplus
/// in a currency becomes accounts that only exist there. Returns the shared
/// users, which are the ground truth for portfolio queries.
pub fn simulate_into<F>(config: &SimConfig, mut sink: F) -> Result<Vec<UserAccounts>>
where
    F: FnMut(&TransactionRecord) -> Result<()>,
{
    config.validate()?;
    let mut currencies: Vec<&CurrencyConfig> = config.currencies.iter().collect();
    currencies.sort_by_key(|c| c.currency_id);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut balances: Vec<Vec<Amount>> = vec![Vec::new(); currencies.len()];
    let mut users: Vec<UserAccounts> = Vec::new();

    for turn in 0..config.turns {
        let acquired: Vec<u64> = currencies.iter().map(|c| new_users_at(c, turn)).collect();
        let shared = acquired.iter().copied().min().unwrap_or(0);
        // Shared users take the first addresses minted in each currency this turn.
        for k in 0..shared {
            let accounts = currencies
                .iter()
                .zip(&balances)
                .map(|(c, b)| AccountId {
                    currency: c.currency_id,
                    address: b.len() as u64 + k,
                })
                .collect::<Vec<_>>();
            users.push(UserAccounts {
                user: users.len() as u64,
                accounts,
            });
        }

        for (idx, cur) in currencies.iter().enumerate() {
            let state = &mut balances[idx];
            let mut emit = |source, destination, amount, fee| {
                sink(&TransactionRecord {
                    turn,
                    currency: cur.currency_id,
                    source,
                    destination,
                    amount,
                    fee,
                })
            };

            for _ in 0..acquired[idx] {
                let address = state.len() as u64;
                state.push(cur.initial_endowment);
                emit(Source::Mint, address, cur.initial_endowment, Amount::ZERO)?;
            }

            let n = state.len();
            if n == 0 {
                continue;
            }
            let mut fee_pool = Amount::ZERO;
            if n >= 2 {
                for sender in 0..n {
                    for _ in 0..config.transactions_per_user_per_turn {
                        let balance = state[sender];
                        if !balance.is_positive() {
                            break;
                        }
                        let fraction = match config.transfer_fraction {
                            FractionDistribution::Uniform => {
                                Amount::from_raw(rng.gen_range(1..SCALE))
                            }
                            FractionDistribution::Constant(f) => f,
                        };
                        let (amount, fee) =
                            transfer_amounts(balance, fraction, cur.miner_fee_rate)?;
                        let mut dst = rng.gen_range(0..n - 1);
                        if dst >= sender {
                            dst += 1;
                        }
                        state[sender] = balance.checked_sub(amount)?.checked_sub(fee)?;
                        state[dst] = state[dst].checked_add(amount)?;
                        fee_pool = fee_pool.checked_add(fee)?;
                        emit(Source::Account(sender as u64), dst as u64, amount, fee)?;
                    }
                }
            }

            let miner = rng.gen_range(0..n);
            state[miner] = state[miner]
                .checked_add(cur.miner_reward)?
                .checked_add(fee_pool)?;
            emit(Source::Mint, miner as u64, cur.miner_reward, Amount::ZERO)?;
        }
    }
    Ok(users)
}

/// Amount and fee for sending `fraction` of `balance`.
///
/// When amount plus fee would exceed the balance, the amount is the largest
/// value whose fee still fits and the fee absorbs the remainder, so the
/// sender ends at exactly zero.
pub(crate) fn transfer_amounts(
    balance: Amount,
    fraction: Amount,
    fee_rate: Amount,
) -> Result<(Amount, Amount)> {
    let amount = balance.checked_mul(fraction)?;
    let fee = amount.checked_mul(fee_rate)?;
    if amount.checked_add(fee)? <= balance {
        return Ok((amount, fee));
    }
    let fits =
        |a: Amount| -> Result<bool> { Ok(a.checked_add(a.checked_mul(fee_rate)?)? <= balance) };
    let mut clipped = balance.checked_div(Amount::ONE.checked_add(fee_rate)?)?;
    while clipped.is_positive() && !fits(clipped)? {
        clipped = clipped.checked_sub(Amount::ULP)?;
    }
    while fits(clipped.checked_add(Amount::ULP)?)? {
        clipped = clipped.checked_add(Amount::ULP)?;
    }
    Ok((clipped, balance.checked_sub(clipped)?))
}
