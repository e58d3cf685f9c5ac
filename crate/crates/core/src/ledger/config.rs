use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CurrencyId;
use crate::amount::Amount;
use crate::error::{Error, Result};

fn default_rate() -> Amount {
    Amount::ONE
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrencyConfig {
    pub currency_id: CurrencyId,
    /// Per-turn slope of user acquisition.
    pub beta1: Amount,
    /// Intercept of user acquisition.
    pub beta0: Amount,
    /// Fraction of every transfer paid to the turn's miner.
    pub miner_fee_rate: Amount,
    /// Value minted to the miner each turn.
    pub miner_reward: Amount,
    /// Balance minted to every new account.
    pub initial_endowment: Amount,
    /// Common-currency units per native unit at snapshot time.
    #[serde(default = "default_rate")]
    pub exchange_rate: Amount,
}

/// How the transferred share of a sender's balance is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionDistribution {
    /// Uniform on the open interval (0, 1).
    #[default]
    Uniform,
    Constant(Amount),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub currencies: Vec<CurrencyConfig>,
    pub turns: u32,
    pub transactions_per_user_per_turn: u32,
    pub seed: u64,
    #[serde(default)]
    pub transfer_fraction: FractionDistribution,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SimConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn currency(&self, id: CurrencyId) -> Option<&CurrencyConfig> {
        self.currencies.iter().find(|c| c.currency_id == id)
    }

    pub fn currency_ids(&self) -> Vec<CurrencyId> {
        let mut ids: Vec<_> = self.currencies.iter().map(|c| c.currency_id).collect();
        ids.sort();
        ids
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let m = self.currencies.len();
        if m == 0 {
            return bad("at least one currency is required".into());
        }
        if self.turns == 0 {
            return bad("turns must be positive".into());
        }
        if self.transactions_per_user_per_turn == 0 {
            return bad("transactions_per_user_per_turn must be positive".into());
        }
        let ids: BTreeSet<u16> = self.currencies.iter().map(|c| c.currency_id.0).collect();
        if ids.len() != m || ids.first() != Some(&1) || ids.last() != Some(&(m as u16)) {
            return bad(format!("currency ids must be distinct and cover 1..={m}"));
        }
        for c in &self.currencies {
            let id = c.currency_id;
            if c.beta0.is_negative() || c.beta1.is_negative() {
                return bad(format!(
                    "currency {id}: acquisition coefficients must be >= 0"
                ));
            }
            if c.miner_fee_rate.is_negative() || c.miner_fee_rate > Amount::ONE {
                return bad(format!("currency {id}: miner_fee_rate must lie in [0, 1]"));
            }
            if c.miner_reward.is_negative() {
                return bad(format!("currency {id}: miner_reward must be >= 0"));
            }
            if !c.initial_endowment.is_positive() {
                return bad(format!("currency {id}: initial_endowment must be > 0"));
            }
            if !c.exchange_rate.is_positive() {
                return bad(format!("currency {id}: exchange_rate must be > 0"));
            }
            if super::new_users_at(c, 0) == 0 {
                return Err(Error::EmptyWorld { currency: id });
            }
        }
        if let FractionDistribution::Constant(f) = self.transfer_fraction {
            if !f.is_positive() || f >= Amount::ONE {
                return bad("constant transfer fraction must lie in (0, 1)".into());
            }
        }
        Ok(())
    }
}
