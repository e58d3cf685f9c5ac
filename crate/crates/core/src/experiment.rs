//! Sweep harness: simulate once, query the finder with ground-truth
//! portfolios of varying size, and aggregate hit and score statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amount::{Amount, SCALE};
use crate::error::{Error, Result};
use crate::finder::{find_accounts, FinderParams, Portfolio};
use crate::ledger::{simulate_into, Address, CurrencyId, SimConfig, UserAccounts};
use crate::snapshot::{ExchangeRates, Replayer, Snapshot};

pub const HISTOGRAM_BINS: usize = 20;
const MAX_RESAMPLES: usize = 32;

/// How the score threshold is derived for a query of size `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    Absolute(Amount),
    /// `S_t = value * m`.
    Normalized(Amount),
    /// `S_t = m - value`.
    BelowMax(Amount),
}

impl ThresholdRule {
    pub fn for_m(&self, m: usize) -> Result<Amount> {
        let m = Amount::from_int(m as i64)?;
        match *self {
            ThresholdRule::Absolute(s) => Ok(s),
            ThresholdRule::Normalized(x) => x.checked_mul(m),
            ThresholdRule::BelowMax(slack) => m.checked_sub(slack),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub m_values: Vec<usize>,
    pub queries_per_m: usize,
    pub snapshot_time: u32,
    pub threshold: ThresholdRule,
    pub seed: u64,
    /// Round leaked shares to this many decimals before querying.
    #[serde(default)]
    pub portfolio_decimals: Option<u32>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let c = self.sim.currencies.len();
        if self.m_values.is_empty() {
            return Err(Error::InvalidConfig("m_values is empty".into()));
        }
        if let Some(m) = self.m_values.iter().find(|&&m| m == 0 || m > c) {
            return Err(Error::InvalidConfig(format!("m = {m} outside 1..={c}")));
        }
        if self.queries_per_m == 0 {
            return Err(Error::InvalidConfig(
                "queries_per_m must be positive".into(),
            ));
        }
        if self.snapshot_time > self.sim.turns {
            return Err(Error::TimeOutOfRange {
                time: self.snapshot_time,
                turns: self.sim.turns,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRow {
    pub m: usize,
    pub query_id: usize,
    pub user: u64,
    pub currencies: Vec<CurrencyId>,
    pub hit: bool,
    pub best_normalized_score: Option<Amount>,
    pub ground_truth_recovered: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeAggregate {
    pub m: usize,
    /// Queries evaluated; skipped ones are excluded.
    pub queries: usize,
    pub misses: usize,
    pub skipped: usize,
    pub missing_rate: Amount,
    pub recovered: usize,
    /// Mean best normalized score over hits.
    pub mean_normalized_score: Option<Amount>,
    /// Counts of best normalized scores in equal-width bins over [0, 1].
    pub histogram: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<QueryRow>,
    pub aggregates: Vec<SizeAggregate>,
    pub users: usize,
    pub db_sizes: BTreeMap<CurrencyId, usize>,
}

impl ExperimentResult {
    pub fn aggregate(&self, m: usize) -> Option<&SizeAggregate> {
        self.aggregates.iter().find(|a| a.m == m)
    }
}

/// Simulates to the snapshot time and returns the snapshot with the ground truth.
pub fn build_world(sim: &SimConfig, time: u32) -> Result<(Snapshot, Vec<UserAccounts>)> {
    let rates = ExchangeRates {
        rates: sim
            .currencies
            .iter()
            .map(|c| (c.currency_id, c.exchange_rate))
            .collect(),
    };
    let mut replayer = Replayer::new(rates, time);
    if time == 0 {
        return Ok((replayer.finish()?, Vec::new()));
    }
    // The first `time` turns do not depend on how many turns follow.
    let truncated = SimConfig {
        turns: time.min(sim.turns),
        ..sim.clone()
    };
    let users = simulate_into(&truncated, |r| replayer.apply(r))?;
    Ok((replayer.finish()?, users))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn query_rng(seed: u64, m: usize, query: usize) -> ChaCha8Rng {
    let a = splitmix64(seed ^ splitmix64(m as u64));
    ChaCha8Rng::seed_from_u64(splitmix64(a ^ query as u64))
}

/// Rounds shares to `decimals` places, then moves the rounding residue onto
/// the largest share so the total stays exactly one.
fn round_portfolio(p: &Portfolio, decimals: u32) -> Result<Portfolio> {
    let mut alphas: BTreeMap<CurrencyId, Amount> = p
        .alphas
        .iter()
        .map(|(&c, a)| (c, a.round_dp(decimals)))
        .collect();
    let sum: i64 = alphas.values().map(|a| a.raw()).sum();
    let largest = *alphas
        .iter()
        .max_by_key(|(c, a)| (**a, std::cmp::Reverse(**c)))
        .map(|(c, _)| c)
        .expect("non-empty portfolio");
    let slot = alphas.get_mut(&largest).expect("present");
    *slot = Amount::from_raw(slot.raw() + SCALE - sum);
    Portfolio::new(alphas)
}

struct Query {
    user: u64,
    currencies: Vec<CurrencyId>,
    addresses: Vec<Address>,
    holdings: Vec<(CurrencyId, Amount)>,
}

fn draw_query(
    rng: &mut ChaCha8Rng,
    users: &[UserAccounts],
    all: &[CurrencyId],
    balances: &HashMap<CurrencyId, HashMap<Address, Amount>>,
    m: usize,
) -> Option<Query> {
    if users.is_empty() {
        return None;
    }
    for _ in 0..MAX_RESAMPLES {
        let user = &users[rng.gen_range(0..users.len())];
        let mut currencies: Vec<CurrencyId> = sample(rng, all.len(), m)
            .into_iter()
            .map(|i| all[i])
            .collect();
        currencies.sort();
        let mut holdings = Vec::with_capacity(m);
        let mut addresses = Vec::with_capacity(m);
        for &c in &currencies {
            let address = user.address_in(c)?;
            match balances[&c].get(&address) {
                Some(&b) if b.is_positive() => {
                    holdings.push((c, b));
                    addresses.push(address);
                }
                _ => break,
            }
        }
        if holdings.len() == m {
            return Some(Query {
                user: user.user,
                currencies,
                addresses,
                holdings,
            });
        }
    }
    None
}

fn bin_of(score: Amount) -> usize {
    let scaled = score.raw().max(0) as i128 * HISTOGRAM_BINS as i128 / SCALE as i128;
    (scaled as usize).min(HISTOGRAM_BINS - 1)
}

/// Runs the sweep. Single-ratio queries are counted as misses without
/// searching, since one share cannot distinguish any account from another.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (snapshot, users) = build_world(&config.sim, config.snapshot_time)?;
    let all = config.sim.currency_ids();
    let balances: HashMap<CurrencyId, HashMap<Address, Amount>> = snapshot
        .dbs
        .iter()
        .map(|db| {
            (
                db.currency,
                db.accounts.iter().map(|a| (a.address, a.balance)).collect(),
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &m in &config.m_values {
        let threshold = config.threshold.for_m(m)?;
        let params = FinderParams::with_threshold(threshold).top(1);
        let mut agg = SizeAggregate {
            m,
            queries: 0,
            misses: 0,
            skipped: 0,
            missing_rate: Amount::ZERO,
            recovered: 0,
            mean_normalized_score: None,
            histogram: vec![0; HISTOGRAM_BINS],
        };
        let mut score_sum: i128 = 0;
        for query_id in 0..config.queries_per_m {
            let mut rng = query_rng(config.seed, m, query_id);
            let Some(query) = draw_query(&mut rng, &users, &all, &balances, m) else {
                agg.skipped += 1;
                continue;
            };
            agg.queries += 1;
            let (best_score, recovered) = if m == 1 {
                (None, false)
            } else {
                let mut portfolio = Portfolio::from_holdings(&query.holdings)?;
                if let Some(d) = config.portfolio_decimals {
                    portfolio = round_portfolio(&portfolio, d)?;
                }
                let sub = snapshot.restrict(&query.currencies)?;
                let outcome = find_accounts(&sub, &portfolio, &params)?;
                match outcome.best {
                    Some(best) => {
                        let recovered = best.accounts.len() == m
                            && best.addresses().eq(query.addresses.iter().copied());
                        (Some(best.normalized_score()), recovered)
                    }
                    None => (None, false),
                }
            };
            match best_score {
                Some(s) => {
                    score_sum += s.raw() as i128;
                    agg.histogram[bin_of(s)] += 1;
                }
                None => agg.misses += 1,
            }
            if recovered {
                agg.recovered += 1;
            }
            rows.push(QueryRow {
                m,
                query_id,
                user: query.user,
                currencies: query.currencies,
                hit: best_score.is_some(),
                best_normalized_score: best_score,
                ground_truth_recovered: recovered,
            });
        }
        if agg.queries > 0 {
            agg.missing_rate = Amount::from_ratio(agg.misses as i128, agg.queries as i128)?;
        }
        let hits = agg.queries - agg.misses;
        if hits > 0 {
            agg.mean_normalized_score = Some(crate::amount::narrow(crate::amount::div_round(
                score_sum,
                hits as i128,
            ))?);
        }
        aggregates.push(agg);
    }

    Ok(ExperimentResult {
        rows,
        aggregates,
        users: users.len(),
        db_sizes: snapshot
            .dbs
            .iter()
            .map(|db| (db.currency, db.len()))
            .collect(),
    })
}

#[derive(Serialize)]
struct MissingRateLine {
    m: usize,
    queries: usize,
    misses: usize,
    missing_rate: Amount,
}

#[derive(Serialize)]
struct ScoreLine {
    query_id: usize,
    normalized_score: Option<Amount>,
    recovered: bool,
}

#[derive(Serialize)]
struct HistogramLine {
    bin_lo: Amount,
    bin_hi: Amount,
    count: u64,
}

/// Writes the CSV tables and `result.json` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("missing_rate.csv"))?;
    for a in &result.aggregates {
        w.serialize(MissingRateLine {
            m: a.m,
            queries: a.queries,
            misses: a.misses,
            missing_rate: a.missing_rate,
        })?;
    }
    w.flush()?;

    for a in &result.aggregates {
        let mut w = csv::Writer::from_path(dir.join(format!("scores_m{}.csv", a.m)))?;
        for row in result.rows.iter().filter(|r| r.m == a.m) {
            w.serialize(ScoreLine {
                query_id: row.query_id,
                normalized_score: row.best_normalized_score,
                recovered: row.ground_truth_recovered,
            })?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(format!("histogram_m{}.csv", a.m)))?;
        let width = SCALE / HISTOGRAM_BINS as i64;
        for (i, &count) in a.histogram.iter().enumerate() {
            w.serialize(HistogramLine {
                bin_lo: Amount::from_raw(width * i as i64),
                bin_hi: Amount::from_raw(width * (i as i64 + 1)),
                count,
            })?;
        }
        w.flush()?;
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        users: usize,
        db_sizes: &'a BTreeMap<CurrencyId, usize>,
        aggregates: &'a [SizeAggregate],
    }
    let summary = Summary {
        users: result.users,
        db_sizes: &result.db_sizes,
        aggregates: &result.aggregates,
    };
    fs::write(
        dir.join("result.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{CurrencyConfig, FractionDistribution};

    fn amt(s: &str) -> Amount {
        s.parse().unwrap()
    }

    fn small_config() -> ExperimentConfig {
        let currencies = (1..=3)
            .map(|i| CurrencyConfig {
                currency_id: CurrencyId(i),
                beta1: amt("0.05"),
                beta0: Amount::from_int(i as i64 + 1).unwrap(),
                miner_fee_rate: amt("0.01"),
                miner_reward: amt("2"),
                initial_endowment: amt("10"),
                exchange_rate: Amount::ONE,
            })
            .collect();
        ExperimentConfig {
            sim: SimConfig {
                currencies,
                turns: 20,
                transactions_per_user_per_turn: 1,
                seed: 5,
                transfer_fraction: FractionDistribution::Uniform,
            },
            m_values: vec![1, 2, 3],
            queries_per_m: 15,
            snapshot_time: 20,
            threshold: ThresholdRule::Normalized(amt("0.99")),
            seed: 11,
            portfolio_decimals: None,
        }
    }

    #[test]
    fn threshold_rules() {
        assert_eq!(
            ThresholdRule::Absolute(amt("4.9")).for_m(5).unwrap(),
            amt("4.9")
        );
        assert_eq!(
            ThresholdRule::Normalized(amt("0.5")).for_m(4).unwrap(),
            amt("2")
        );
        assert_eq!(
            ThresholdRule::BelowMax(amt("0.01")).for_m(5).unwrap(),
            amt("4.99")
        );
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(bin_of(Amount::ZERO), 0);
        assert_eq!(bin_of(amt("0.05")), 1);
        assert_eq!(bin_of(amt("0.999")), 19);
        assert_eq!(bin_of(Amount::ONE), 19);
        assert_eq!(bin_of(amt("-0.2")), 0);
    }

    #[test]
    fn rounding_keeps_unit_sum() {
        let p = Portfolio::from_holdings(&[
            (CurrencyId(1), amt("1")),
            (CurrencyId(2), amt("1")),
            (CurrencyId(3), amt("1")),
        ])
        .unwrap();
        let r = round_portfolio(&p, 2).unwrap();
        let v: Vec<_> = r.alphas.values().map(|a| a.to_string()).collect();
        assert_eq!(v, vec!["0.34", "0.33", "0.33"]);
    }

    #[test]
    fn sweep_invariants() {
        let cfg = small_config();
        let res = run_experiment(&cfg).unwrap();
        let one = res.aggregate(1).unwrap();
        assert_eq!(one.missing_rate, Amount::ONE);
        for a in &res.aggregates {
            let hits = (a.queries - a.misses) as u64;
            assert_eq!(a.histogram.iter().sum::<u64>(), hits);
            assert!(a.missing_rate >= Amount::ZERO && a.missing_rate <= Amount::ONE);
        }
        for row in &res.rows {
            if let Some(s) = row.best_normalized_score {
                let lo = Amount::from_ratio(row.m as i128 - 2, row.m as i128).unwrap();
                assert!(s >= lo && s <= Amount::ONE, "{s} for m={}", row.m);
            }
        }
        assert_eq!(run_experiment(&cfg).unwrap(), res);
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut cfg = small_config();
        cfg.m_values = vec![4];
        assert!(run_experiment(&cfg).is_err());
        cfg.m_values = vec![0];
        assert!(run_experiment(&cfg).is_err());
    }
}
