//! Exhaustive reference search over every account tuple.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::amount::{Amount, SCALE};
use crate::error::{Error, Result};
use crate::finder::{for_each_product, score, AnswerTuple, Portfolio, SearchSpace};
use crate::snapshot::{AccountBalance, Snapshot};

pub const DEFAULT_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `None` only when some searched currency has no accounts.
    pub best: Option<AnswerTuple>,
    pub tuples_examined: u128,
}

/// Product of the searched database sizes.
pub fn search_size(snapshot: &Snapshot, portfolio: &Portfolio) -> Result<u128> {
    let space = SearchSpace::new(snapshot, portfolio)?;
    Ok(space
        .dims
        .iter()
        .fold(1u128, |acc, (db, _)| acc.saturating_mul(db.len() as u128)))
}

/// Scores every tuple and returns the best under the finder's ranking.
pub fn exhaustive_best(
    snapshot: &Snapshot,
    portfolio: &Portfolio,
    limit: u128,
) -> Result<OracleResult> {
    run(snapshot, portfolio, limit, false)
}

/// As [`exhaustive_best`], additionally checking every score against
/// [`reference_score`]: each must be the exact score rounded to the nearest
/// unit in the last place.
pub fn exhaustive_best_checked(
    snapshot: &Snapshot,
    portfolio: &Portfolio,
    limit: u128,
) -> Result<OracleResult> {
    run(snapshot, portfolio, limit, true)
}

fn run(
    snapshot: &Snapshot,
    portfolio: &Portfolio,
    limit: u128,
    check: bool,
) -> Result<OracleResult> {
    let size = search_size(snapshot, portfolio)?;
    if size > limit {
        return Err(Error::ProductLimit { size, limit });
    }
    let space = SearchSpace::new(snapshot, portfolio)?;
    let alphas = space.alphas();
    let lists: Vec<&[AccountBalance]> = space
        .dims
        .iter()
        .map(|(db, _)| db.accounts.as_slice())
        .collect();
    let mut balances = vec![Amount::ZERO; lists.len()];
    let mut best: Option<AnswerTuple> = None;
    let mut examined = 0u128;
    for_each_product(&lists, |picks| {
        examined += 1;
        for (slot, p) in balances.iter_mut().zip(picks) {
            *slot = p.balance;
        }
        let s = score(&alphas, &balances)?;
        if check {
            let exact = reference_score(&alphas, &balances);
            let scaled = &exact * big(SCALE as i128);
            let err = (big(s.raw() as i128) - scaled).abs();
            if err * big(2) > BigRational::one() {
                return Err(Error::ScorerMismatch(format!("{s} vs exact {exact}")));
            }
        }
        let better = match &best {
            None => true,
            Some(b) if s != b.score => s > b.score,
            Some(b) => space
                .id_order
                .iter()
                .map(|&i| picks[i].address)
                .lt(b.addresses()),
        };
        if better {
            best = Some(space.answer(picks, s));
        }
        Ok(())
    })?;
    Ok(OracleResult {
        best,
        tuples_examined: examined,
    })
}

fn big(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn decimal(a: Amount) -> BigRational {
    BigRational::new(BigInt::from(a.raw()), BigInt::from(SCALE))
}

/// Exact rational score, written out term by term.
pub fn reference_score(alphas: &[Amount], balances: &[Amount]) -> BigRational {
    let mut total = BigRational::zero();
    for b in balances {
        total += decimal(*b);
    }
    let mut distance = BigRational::zero();
    for i in 0..alphas.len() {
        let share = decimal(balances[i]) / &total;
        distance += (decimal(alphas[i]) - share).abs();
    }
    big(alphas.len() as i128) - distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finder::{find_accounts, FinderParams};
    use crate::ledger::CurrencyId;
    use crate::snapshot::CurrencyDb;

    fn amt(s: &str) -> Amount {
        s.parse().unwrap()
    }

    fn db(currency: u16, balances: &[(u64, &str)]) -> CurrencyDb {
        CurrencyDb::from_balances(
            CurrencyId(currency),
            balances
                .iter()
                .map(|&(a, b)| AccountBalance::new(a, amt(b))),
        )
    }

    fn portfolio(pairs: &[(u16, &str)]) -> Portfolio {
        Portfolio::new(
            pairs
                .iter()
                .map(|&(c, a)| (CurrencyId(c), amt(a)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_dbs() {
        let snap = Snapshot::new(
            0,
            vec![db(1, &[(4, "1")]), db(2, &[(5, "2")]), db(3, &[(6, "3")])],
        );
        let p = portfolio(&[(1, "0.2"), (2, "0.3"), (3, "0.5")]);
        let r = exhaustive_best_checked(&snap, &p, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.tuples_examined, 1);
        assert_eq!(
            r.best.unwrap().addresses().collect::<Vec<_>>(),
            vec![4, 5, 6]
        );
    }

    #[test]
    fn planted_tuple() {
        let snap = Snapshot::new(
            0,
            vec![
                db(1, &[(1, "3"), (7, "20"), (2, "90")]),
                db(2, &[(3, "1"), (8, "30"), (4, "70"), (5, "400")]),
                db(3, &[(9, "50"), (6, "5")]),
            ],
        );
        let p = portfolio(&[(1, "0.2"), (2, "0.3"), (3, "0.5")]);
        let r = exhaustive_best_checked(&snap, &p, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.tuples_examined, 24);
        let best = r.best.unwrap();
        assert_eq!(best.score, amt("3"));
        let f = find_accounts(&snap, &p, &FinderParams::with_threshold(Amount::ZERO)).unwrap();
        assert_eq!(f.best.unwrap(), best);
    }

    #[test]
    fn refuses_large_products() {
        let snap = Snapshot::new(
            0,
            vec![db(1, &[(1, "1"), (2, "2")]), db(2, &[(1, "1"), (2, "2")])],
        );
        let p = portfolio(&[(1, "0.5"), (2, "0.5")]);
        assert!(matches!(
            exhaustive_best(&snap, &p, 3),
            Err(Error::ProductLimit { size: 4, limit: 3 })
        ));
    }

    #[test]
    fn reference_score_is_exact() {
        let s = reference_score(&[amt("0.6"), amt("0.4")], &[amt("3"), amt("7")]);
        assert_eq!(s, BigRational::new(7.into(), 5.into()));
        let s = reference_score(&[amt("0.5"), amt("0.5")], &[amt("1"), amt("2")]);
        assert_eq!(s, BigRational::new(5.into(), 3.into()));
    }
}
