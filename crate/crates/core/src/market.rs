//! Settlement model for the day-ahead auction plus single-price imbalance market.
//!
//! Revenue for one half-hour with bid `x`, production `y`, day-ahead price
//! `da` and system price `ss`:
//!
//! ```text
//! R = x*da + (y - x) * (ss - k*(y - x))
//! ```
//!
//! The `k*(y - x)` term models the participant's own imbalance moving the
//! imbalance price. Revenue is strictly concave in `x`, so each period has a
//! unique revenue-maximising bid.

use crate::error::{Error, Result};
use crate::time::Period;

/// Day-ahead and single system price for one settlement period, in GBP/MWh.
/// Negative prices are legitimate market outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketPrices {
    pub period: Period,
    pub da_price: f64,
    pub ss_price: f64,
}

impl MarketPrices {
    pub fn validate(&self) -> Result<()> {
        if !self.da_price.is_finite() {
            return Err(Error::not_finite("da_price", self.da_price));
        }
        if !self.ss_price.is_finite() {
            return Err(Error::not_finite("ss_price", self.ss_price));
        }
        Ok(())
    }
}

/// Energy sold day-ahead and energy delivered for one period, in MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradePosition {
    pub period: Period,
    pub bid: f64,
    pub production: f64,
}

impl TradePosition {
    pub fn validate(&self) -> Result<()> {
        if !self.bid.is_finite() {
            return Err(Error::not_finite("bid", self.bid));
        }
        if !self.production.is_finite() {
            return Err(Error::not_finite("production", self.production));
        }
        Ok(())
    }
}

/// Price impact of own imbalance on the system price, GBP/MWh per MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketImpactCoefficient(f64);

impl MarketImpactCoefficient {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidCoefficient(k));
        }
        Ok(MarketImpactCoefficient(k))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for MarketImpactCoefficient {
    fn default() -> Self {
        MarketImpactCoefficient(0.07)
    }
}

/// System price adjusted for the participant's own imbalance: `ss - k*(y - x)`.
pub fn effective_imbalance_price(
    prices: &MarketPrices,
    position: &TradePosition,
    k: MarketImpactCoefficient,
) -> Result<f64> {
    prices.validate()?;
    position.validate()?;
    Ok(prices.ss_price - k.value() * (position.production - position.bid))
}

/// Period revenue in GBP: day-ahead income plus imbalance settlement at the
/// effective imbalance price.
pub fn settle_revenue(
    prices: &MarketPrices,
    position: &TradePosition,
    k: MarketImpactCoefficient,
) -> Result<f64> {
    prices.validate()?;
    position.validate()?;
    let imbalance = position.production - position.bid;
    Ok(position.bid * prices.da_price
        + imbalance * (prices.ss_price - k.value() * imbalance))
}

/// Spread between the imbalance and day-ahead markets: `ss - da`.
pub fn price_spread(prices: &MarketPrices) -> f64 {
    prices.ss_price - prices.da_price
}

/// Bid maximising period revenue: `y - (ss - da) / (2k)`. Returned unclipped;
/// bid bounds are a submission-validation concern, not a settlement one.
pub fn optimal_bid(
    production: f64,
    prices: &MarketPrices,
    k: MarketImpactCoefficient,
) -> Result<f64> {
    prices.validate()?;
    if !production.is_finite() {
        return Err(Error::not_finite("production", production));
    }
    Ok(production - price_spread(prices) / (2.0 * k.value()))
}

/// Revenue at the optimal bid; closed form `y*da + (ss - da)^2 / (4k)`.
pub fn max_revenue(
    production: f64,
    prices: &MarketPrices,
    k: MarketImpactCoefficient,
) -> Result<f64> {
    prices.validate()?;
    if !production.is_finite() {
        return Err(Error::not_finite("production", production));
    }
    let spread = price_spread(prices);
    Ok(production * prices.da_price + spread * spread / (4.0 * k.value()))
}
