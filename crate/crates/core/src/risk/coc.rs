//! Cost-of-capital risk adjustment `sum_t r_t C_t / (1 + d_t)^t` with
//! `C_t = VaR(X_t) - E(X_t)`.

use serde::{Deserialize, Serialize};

use super::measures::{mean, var};
use crate::error::{Error, Result};

pub const DEFAULT_COST_RATE: f64 = 0.05;
pub const DEFAULT_DISCOUNT_RATE: f64 = 0.02;
pub const DEFAULT_CAPITAL_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocAssumptions {
    /// `r_t` for `t = 1..=T`.
    pub cost_rates: Vec<f64>,
    /// `d_t` for `t = 1..=T`.
    pub discount_rates: Vec<f64>,
    /// VaR level of the per-period capital.
    pub capital_level: f64,
}

impl CocAssumptions {
    pub fn flat(horizon: usize, cost_rate: f64, discount_rate: f64) -> Self {
        CocAssumptions {
            cost_rates: vec![cost_rate; horizon],
            discount_rates: vec![discount_rate; horizon],
            capital_level: DEFAULT_CAPITAL_LEVEL,
        }
    }

    pub fn horizon(&self) -> usize {
        self.cost_rates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost_rates.is_empty() || self.cost_rates.len() != self.discount_rates.len() {
            return Err(Error::Config("cost-of-capital horizon must be >= 1 with one cost and discount rate per period".into()));
        }
        if self.cost_rates.iter().chain(&self.discount_rates).any(|r| !r.is_finite()) {
            return Err(Error::Config("cost-of-capital rates must be finite".into()));
        }
        if self.discount_rates.iter().any(|&d| d <= -1.0) {
            return Err(Error::Config("discount rates must exceed -100%".into()));
        }
        if !(self.capital_level > 0.0 && self.capital_level < 1.0) {
            return Err(Error::Config(format!("capital level must lie in (0, 1), got {}", self.capital_level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocResult {
    /// `C_t` per period.
    pub capital: Vec<f64>,
    pub adjustment: f64,
}

/// Risk adjustment from given per-period capital amounts.
pub fn coc_from_capital(capital: &[f64], a: &CocAssumptions) -> Result<f64> {
    a.validate()?;
    if capital.len() != a.horizon() {
        return Err(Error::Config(format!("{} capital amounts for a horizon of {}", capital.len(), a.horizon())));
    }
    Ok(capital
        .iter()
        .enumerate()
        .map(|(t, c)| a.cost_rates[t] * c / (1.0 + a.discount_rates[t]).powi(t as i32 + 1))
        .sum())
}

/// Risk adjustment from simulated losses of each period `t = 1..=T`.
pub fn coc_risk_adjustment(period_losses: &[Vec<f64>], a: &CocAssumptions) -> Result<CocResult> {
    a.validate()?;
    let capital = period_losses
        .iter()
        .map(|x| Ok(var(x, a.capital_level)? - mean(x)?))
        .collect::<Result<Vec<f64>>>()?;
    let adjustment = coc_from_capital(&capital, a)?;
    Ok(CocResult { capital, adjustment })
}
