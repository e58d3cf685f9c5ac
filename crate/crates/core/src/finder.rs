//! Portfolio matching: scoring candidate tuples, locating accounts near a
//! target balance, and the pivot search over all currencies.
//!
//! The search pivots on the smallest currency database. For every pivot
//! account it derives, from the portfolio ratios, the balance the owner
//! should hold in each other currency, looks up the accounts at or around
//! that balance, and scores the Cartesian product of those candidates.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::amount::{div_round, Amount, SCALE};
use crate::error::{Error, Result};
use crate::ledger::{Address, CurrencyId};
use crate::snapshot::{AccountBalance, CurrencyDb, Snapshot};

/// Per-tuple candidate-product limit; larger pivots are skipped and reported.
pub const DEFAULT_PRODUCT_CAP: u128 = 1_000_000;

/// Share of total holdings per currency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portfolio {
    pub alphas: BTreeMap<CurrencyId, Amount>,
}

impl Portfolio {
    pub fn new(alphas: BTreeMap<CurrencyId, Amount>) -> Result<Self> {
        let p = Self { alphas };
        p.validate()?;
        Ok(p)
    }

    /// Portfolio implied by a set of holdings: each share is `balance / total`.
    pub fn from_holdings(holdings: &[(CurrencyId, Amount)]) -> Result<Self> {
        let total: i128 = holdings.iter().map(|(_, b)| b.raw() as i128).sum();
        if total <= 0 {
            return Err(Error::InvalidPortfolio("holdings sum to zero".into()));
        }
        let alphas = holdings
            .iter()
            .map(|&(c, b)| Ok((c, Amount::from_ratio(b.raw() as i128, total)?)))
            .collect::<Result<_>>()?;
        Self::new(alphas)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn get(&self, currency: CurrencyId) -> Option<Amount> {
        self.alphas.get(&currency).copied()
    }

    /// Each share in `[0, 1]`; the shares sum to one within one unit in the last
    /// place per currency.
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::InvalidPortfolio("no currencies".into()));
        }
        for (c, a) in &self.alphas {
            if a.is_negative() || *a > Amount::ONE {
                return Err(Error::InvalidPortfolio(format!(
                    "share of currency {c} is {a}"
                )));
            }
        }
        let sum: i128 = self.alphas.values().map(|a| a.raw() as i128).sum();
        if (sum - SCALE as i128).abs() > self.alphas.len() as i128 {
            let sum = Amount::from_raw(sum as i64);
            return Err(Error::InvalidPortfolio(format!(
                "shares sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Portfolio = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleAccount {
    pub currency: CurrencyId,
    pub address: Address,
    pub balance: Amount,
}

/// One account per searched currency, ordered by currency id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerTuple {
    pub accounts: Vec<TupleAccount>,
    pub score: Amount,
}

impl AnswerTuple {
    pub fn addresses(&self) -> impl Iterator<Item = Address> + '_ {
        self.accounts.iter().map(|a| a.address)
    }

    pub fn normalized_score(&self) -> Amount {
        normalized_score(self.score, self.accounts.len())
    }

    /// Higher score first, then the smaller address tuple.
    pub(crate) fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .score
            .cmp(&self.score)
            .then_with(|| self.addresses().cmp(other.addresses()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinderParams {
    /// Answers scoring below this are dropped.
    pub score_threshold: Amount,
    /// Keep at most this many of the best answers.
    pub max_answers: Option<usize>,
    #[serde(default = "default_cap")]
    pub product_cap: u128,
}

fn default_cap() -> u128 {
    DEFAULT_PRODUCT_CAP
}

impl FinderParams {
    pub fn with_threshold(score_threshold: Amount) -> Self {
        Self {
            score_threshold,
            max_answers: None,
            product_cap: DEFAULT_PRODUCT_CAP,
        }
    }

    pub fn top(mut self, k: usize) -> Self {
        self.max_answers = Some(k);
        self
    }
}

/// What the search skipped and why.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    /// Currencies left out because their share is zero.
    pub excluded_zero_share: Vec<CurrencyId>,
    /// Searched currencies holding no accounts; any entry makes the search a miss.
    pub empty_currencies: Vec<CurrencyId>,
    pub pivots: u64,
    /// Pivots whose target balance fell outside some currency's range.
    pub pivot_misses: u64,
    /// Pivots whose candidate product exceeded the cap.
    pub overflow_pivots: u64,
    pub tuples_scored: u64,
    pub tuples_passed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinderOutcome {
    pub best: Option<AnswerTuple>,
    /// Passing answers, best first.
    pub retained: Vec<AnswerTuple>,
    pub diagnostics: SearchDiagnostics,
}

impl FinderOutcome {
    pub fn is_hit(&self) -> bool {
        self.best.is_some()
    }
}

/// `m - sum_i |alpha_i - balance_i / sum_j balance_j|`, with `m = alphas.len()`.
///
/// The distance is computed exactly and rounded once.
pub fn score(alphas: &[Amount], balances: &[Amount]) -> Result<Amount> {
    if alphas.len() != balances.len() {
        return Err(Error::PortfolioMismatch(format!(
            "{} shares for {} balances",
            alphas.len(),
            balances.len()
        )));
    }
    let total: i128 = balances.iter().map(|b| b.raw() as i128).sum();
    if total <= 0 {
        return Err(Error::InvalidCandidate);
    }
    let mut distance: i128 = 0;
    for (a, b) in alphas.iter().zip(balances) {
        let term = (a.raw() as i128)
            .checked_mul(total)
            .and_then(|x| x.checked_sub(b.raw() as i128 * SCALE as i128))
            .ok_or(Error::Overflow)?;
        distance = distance.checked_add(term.abs()).ok_or(Error::Overflow)?;
    }
    let m = alphas.len() as i128 * SCALE as i128;
    crate::amount::narrow(m - div_round(distance, total))
}

pub fn normalized_score(score: Amount, m: usize) -> Amount {
    Amount::from_ratio(score.raw() as i128, m.max(1) as i128 * SCALE as i128)
        .expect("a score divided by m stays in range")
}

/// Balance the pivot's owner should hold in a currency with share `alpha_i`.
pub fn target_balance(pivot_balance: Amount, alpha_1: Amount, alpha_i: Amount) -> Result<Amount> {
    if alpha_1.is_zero() {
        return Err(Error::PivotRatioZero);
    }
    pivot_balance.checked_mul_div(alpha_i, alpha_1)
}

/// Index range of `binary_find` within `accounts`.
pub fn binary_find_range(accounts: &[AccountBalance], target: Amount) -> Range<usize> {
    let (first, last) = match (accounts.first(), accounts.last()) {
        (Some(f), Some(l)) => (f.balance, l.balance),
        _ => return 0..0,
    };
    if target < first || target > last {
        return 0..0;
    }
    let lower = |b: Amount| accounts.partition_point(|a| a.balance < b);
    let upper = |b: Amount| accounts.partition_point(|a| a.balance <= b);
    let at = lower(target);
    if accounts[at].balance == target {
        return at..upper(target);
    }
    // `at > 0` because target > first here.
    let below = accounts[at - 1].balance;
    let above = accounts[at].balance;
    lower(below)..upper(above)
}

/// Accounts matching `target` exactly, or else the accounts bracketing it.
///
/// Returns every account whose balance equals `target` when there is one.
/// Otherwise returns the closest balance below and the closest above,
/// each with all of its ties. Targets outside the list's range yield nothing.
pub fn binary_find(accounts: &[AccountBalance], target: Amount) -> &[AccountBalance] {
    &accounts[binary_find_range(accounts, target)]
}

/// Searched currencies with their shares, smallest database first.
pub(crate) struct SearchSpace<'a> {
    pub dims: Vec<(&'a CurrencyDb, Amount)>,
    /// Position in `dims` for each currency in id order.
    pub id_order: Vec<usize>,
    pub excluded: Vec<CurrencyId>,
}

impl<'a> SearchSpace<'a> {
    pub fn new(snapshot: &'a Snapshot, portfolio: &Portfolio) -> Result<Self> {
        portfolio.validate()?;
        let mut snap_ids = snapshot.currencies();
        snap_ids.sort();
        let port_ids: Vec<_> = portfolio.alphas.keys().copied().collect();
        if snap_ids != port_ids {
            return Err(Error::PortfolioMismatch(format!(
                "snapshot currencies {snap_ids:?}, portfolio currencies {port_ids:?}"
            )));
        }
        let mut dims = Vec::new();
        let mut excluded = Vec::new();
        for db in &snapshot.dbs {
            let alpha = portfolio.alphas[&db.currency];
            if alpha.is_zero() {
                excluded.push(db.currency);
            } else {
                dims.push((db, alpha));
            }
        }
        dims.sort_by_key(|(db, _)| (db.len(), db.currency));
        excluded.sort();
        let mut id_order: Vec<usize> = (0..dims.len()).collect();
        id_order.sort_by_key(|&i| dims[i].0.currency);
        Ok(Self {
            dims,
            id_order,
            excluded,
        })
    }

    pub fn alphas(&self) -> Vec<Amount> {
        self.dims.iter().map(|(_, a)| *a).collect()
    }

    pub fn empty_currencies(&self) -> Vec<CurrencyId> {
        let mut empty: Vec<_> = self
            .dims
            .iter()
            .filter(|(db, _)| db.is_empty())
            .map(|(db, _)| db.currency)
            .collect();
        empty.sort();
        empty
    }

    /// Builds the answer for one account per dimension (in `dims` order).
    pub fn answer(&self, picks: &[AccountBalance], score: Amount) -> AnswerTuple {
        AnswerTuple {
            accounts: self
                .id_order
                .iter()
                .map(|&i| TupleAccount {
                    currency: self.dims[i].0.currency,
                    address: picks[i].address,
                    balance: picks[i].balance,
                })
                .collect(),
            score,
        }
    }
}

/// Calls `visit` with every combination drawing one element from each list.
pub(crate) fn for_each_product<F>(lists: &[&[AccountBalance]], mut visit: F) -> Result<()>
where
    F: FnMut(&[AccountBalance]) -> Result<()>,
{
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; lists.len()];
    let mut picks: Vec<AccountBalance> = lists.iter().map(|l| l[0]).collect();
    loop {
        visit(&picks)?;
        let mut d = lists.len();
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < lists[d].len() {
                picks[d] = lists[d][idx[d]];
                break;
            }
            idx[d] = 0;
            picks[d] = lists[d][0];
        }
    }
}

struct Retained {
    cap: Option<usize>,
    answers: Vec<AnswerTuple>,
    /// Lowest score still able to enter the top `cap` once it is full.
    floor: Option<Amount>,
}

impl Retained {
    fn new(cap: Option<usize>) -> Self {
        Self {
            cap,
            answers: Vec::new(),
            floor: None,
        }
    }

    fn admits(&self, score: Amount) -> bool {
        self.floor.is_none_or(|f| score >= f)
    }

    fn push(&mut self, answer: AnswerTuple) {
        self.answers.push(answer);
        if let Some(cap) = self.cap {
            if self.answers.len() >= cap.saturating_mul(2).max(64) {
                self.compact(cap);
            }
        }
    }

    fn compact(&mut self, cap: usize) {
        self.answers.sort_by(AnswerTuple::rank_cmp);
        self.answers.truncate(cap);
        if self.answers.len() == cap {
            self.floor = self.answers.last().map(|a| a.score);
        }
    }

    fn finish(mut self) -> Vec<AnswerTuple> {
        self.answers.sort_by(AnswerTuple::rank_cmp);
        if let Some(cap) = self.cap {
            self.answers.truncate(cap);
        }
        self.answers
    }
}

/// Searches `snapshot` for the account tuple best matching `portfolio`.
///
/// Currencies with a zero share are left out of the search and the score
/// is taken over the remaining ones. Among equal scores the tuple with the
/// lexicographically smallest addresses (in currency id order) ranks first.
pub fn find_accounts(
    snapshot: &Snapshot,
    portfolio: &Portfolio,
    params: &FinderParams,
) -> Result<FinderOutcome> {
    let space = SearchSpace::new(snapshot, portfolio)?;
    let mut diagnostics = SearchDiagnostics {
        excluded_zero_share: space.excluded.clone(),
        empty_currencies: space.empty_currencies(),
        ..Default::default()
    };
    let mut retained = Retained::new(params.max_answers.map(|k| k.max(1)));
    if !diagnostics.empty_currencies.is_empty() || space.dims.is_empty() {
        return Ok(FinderOutcome {
            best: None,
            retained: Vec::new(),
            diagnostics,
        });
    }

    let alphas = space.alphas();
    let (pivot_db, pivot_alpha) = space.dims[0];
    let mut lists: Vec<&[AccountBalance]> = vec![&[]; space.dims.len()];
    let mut balances = vec![Amount::ZERO; space.dims.len()];

    'pivots: for pivot in pivot_db.accounts.chunks(1) {
        diagnostics.pivots += 1;
        lists[0] = pivot;
        let mut product: u128 = 1;
        for (i, (db, alpha)) in space.dims.iter().enumerate().skip(1) {
            let found = match target_balance(pivot[0].balance, pivot_alpha, *alpha) {
                Ok(target) => binary_find(&db.accounts, target),
                // Beyond the representable range, hence beyond every balance.
                Err(Error::Overflow) => &[],
                Err(e) => return Err(e),
            };
            if found.is_empty() {
                diagnostics.pivot_misses += 1;
                continue 'pivots;
            }
            product *= found.len() as u128;
            lists[i] = found;
        }
        if product > params.product_cap {
            diagnostics.overflow_pivots += 1;
            continue;
        }
        for_each_product(&lists, |picks| {
            for (slot, p) in balances.iter_mut().zip(picks) {
                *slot = p.balance;
            }
            let s = score(&alphas, &balances)?;
            diagnostics.tuples_scored += 1;
            if s >= params.score_threshold {
                diagnostics.tuples_passed += 1;
                if retained.admits(s) {
                    retained.push(space.answer(picks, s));
                }
            }
            Ok(())
        })?;
    }

    let retained = retained.finish();
    Ok(FinderOutcome {
        best: retained.first().cloned(),
        retained,
        diagnostics,
    })
}
