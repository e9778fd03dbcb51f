//! Bidding strategies over generation quantiles and price-spread information.
//!
//! Three bidders are provided: the median baseline, an expected-revenue
//! maximiser driven by a spread estimate, and a learned regressor trained on
//! historical optimal bids. All respect the configured bid bounds and see
//! only data available at the 09:20 UTC submission deadline of the prior day.

use crate::error::{Error, Result};
use crate::market::{self, MarketImpactCoefficient, MarketPrices};
use crate::quantiles::interpolated_mean;
use crate::scoring::QuantileForecast;
use crate::time::{DayConvention, Period};
use chrono::{DateTime, Duration, Utc};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// How long after delivery a settlement-price observation becomes available
/// to participants.
pub const PRICE_AVAILABILITY_LAG_DAYS: i64 = 7;

/// Where a spread estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadSource {
    Climatology,
    External,
}

/// Expected imbalance/day-ahead spread for one period, GBP/MWh.
#[derive(Debug, Clone, Copy)]
pub struct SpreadEstimate {
    pub period: Period,
    pub mean_spread: f64,
    pub source: SpreadSource,
}

/// Which bidder to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Median,
    ExpectedOptimal,
    Learned,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Median => "median",
            StrategyKind::ExpectedOptimal => "expected_optimal",
            StrategyKind::Learned => "learned",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(StrategyKind::Median),
            "expected_optimal" => Ok(StrategyKind::ExpectedOptimal),
            "learned" => Ok(StrategyKind::Learned),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Bid bounds and market assumptions shared by all strategies.
#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub k: MarketImpactCoefficient,
    pub bid_floor: f64,
    pub bid_cap: f64,
    pub climatology_window_days: u32,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bid_floor > self.bid_cap {
            return Err(Error::Config(format!(
                "bid_floor {} above bid_cap {}",
                self.bid_floor, self.bid_cap
            )));
        }
        if self.climatology_window_days < 1 {
            return Err(Error::Config("climatology window must be >= 1 day".into()));
        }
        Ok(())
    }

    pub fn clip(&self, bid: f64) -> f64 {
        bid.max(self.bid_floor).min(self.bid_cap)
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Median,
            k: MarketImpactCoefficient::default(),
            bid_floor: 0.0,
            // 3.6 GW portfolio over a half hour
            bid_cap: 1800.0,
            climatology_window_days: 30,
        }
    }
}

/// Minimum same-slot observations for a usable climatology.
const MIN_SLOT_OBSERVATIONS: usize = 7;

/// Mean spread over the trailing window, restricted to the target's slot of
/// day. History must lie strictly before the target period.
pub fn climatological_spread(
    history: &[MarketPrices],
    target: Period,
    window_days: u32,
) -> Result<SpreadEstimate> {
    let window_start = target.start() - Duration::days(window_days as i64);
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in history {
        if row.period.start() >= target.start() {
            return Err(Error::Precondition(format!(
                "price history contains {} at/after target {}",
                row.period, target
            )));
        }
        if row.period.slot() == target.slot() && row.period.start() >= window_start {
            sum += market::price_spread(row);
            n += 1;
        }
    }
    if n < MIN_SLOT_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "{n} same-slot observations in the {window_days}-day window (need {MIN_SLOT_OBSERVATIONS})"
        )));
    }
    Ok(SpreadEstimate {
        period: target,
        mean_spread: sum / n as f64,
        source: SpreadSource::Climatology,
    })
}

/// Baseline bidder: the median forecast, clipped to the bid bounds.
pub fn bid_median(forecast: &QuantileForecast, config: &StrategyConfig) -> f64 {
    config.clip(forecast.median())
}

/// Expected-revenue-maximising bidder: `E[y] - spread / (2k)`, clipped.
/// `E[y]` is the mean of the distribution implied by the nine quantiles.
pub fn bid_expected_optimal(
    forecast: &QuantileForecast,
    spread: &SpreadEstimate,
    config: &StrategyConfig,
) -> f64 {
    let expected_production = interpolated_mean(&forecast.values);
    config.clip(expected_production - spread.mean_spread / (2.0 * config.k.value()))
}

/// One training observation for the learned bidder.
#[derive(Debug, Clone, Copy)]
pub struct BidTrainingRow {
    pub period: Period,
    pub median_forecast: f64,
    pub slot: u32,
    pub spread_feature: f64,
    /// Revenue-maximising bid computed from realised production and prices.
    pub target_bid: f64,
}

impl BidTrainingRow {
    fn features(&self) -> [f64; 4] {
        feature_vector(self.median_forecast, self.spread_feature, self.slot)
    }
}

fn feature_vector(median_forecast: f64, spread_feature: f64, slot: u32) -> [f64; 4] {
    let angle = std::f64::consts::TAU * slot as f64 / 48.0;
    [median_forecast, spread_feature, angle.sin(), angle.cos()]
}

/// Result of assembling a training table: rows plus the count of aligned
/// periods dropped for missing data.
#[derive(Debug, Clone)]
pub struct BidTrainingTable {
    pub rows: Vec<BidTrainingRow>,
    pub dropped: usize,
}

/// Build the optimal-bid training table from historical forecasts, prices,
/// and production.
///
/// Each row's features are built from the information set of that row's own
/// submission deadline (09:20 UTC the day before delivery, minus the
/// settlement-data lag), so training features are the same function of the
/// same information the bidder sees at prediction time. Targets use realised
/// outcomes, which is the point of the exercise: the bidder learns to
/// predict them. `fit_deadline` restricts the table to periods whose outcome
/// was observable when the fit runs.
pub fn build_optimal_bid_dataset(
    forecasts: &BTreeMap<Period, QuantileForecast>,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    k: MarketImpactCoefficient,
    window_days: u32,
    convention: DayConvention,
    fit_deadline: Option<DateTime<Utc>>,
) -> Result<BidTrainingTable> {
    let lag = Duration::days(PRICE_AVAILABILITY_LAG_DAYS);
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (&period, forecast) in forecasts {
        if let Some(deadline) = fit_deadline {
            if period.start() + lag > deadline {
                continue; // outcome not yet observable at fit time
            }
        }
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            dropped += 1;
            continue;
        };
        let row_deadline = crate::time::submission_deadline(period.market_day(convention));
        let available: Vec<MarketPrices> = prices
            .values()
            .filter(|p| p.period.start() + lag <= row_deadline)
            .copied()
            .collect();
        let spread_feature = match climatological_spread(&available, period, window_days) {
            Ok(estimate) => estimate.mean_spread,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        rows.push(BidTrainingRow {
            period,
            median_forecast: forecast.median(),
            slot: period.slot(),
            spread_feature,
            target_bid: market::optimal_bid(production, price, k)?,
        });
    }
    Ok(BidTrainingTable { rows, dropped })
}

/// Least-squares linear bidder over (median forecast, spread feature, slot
/// harmonics). Create unfitted, call [`BidRegressor::fit`], then predict.
#[derive(Debug, Clone, Default)]
pub struct BidRegressor {
    params: Option<DVector<f64>>,
}

impl BidRegressor {
    pub fn new() -> Self {
        BidRegressor::default()
    }

    pub fn is_fitted(&self) -> bool {
        self.params.is_some()
    }

    pub fn fit(&mut self, rows: &[BidTrainingRow]) -> Result<()> {
        if rows.len() < 5 {
            return Err(Error::InsufficientData(format!(
                "{} training rows for 5 regression parameters",
                rows.len()
            )));
        }
        let design = DMatrix::from_fn(rows.len(), 5, |i, j| {
            if j == 0 {
                1.0
            } else {
                rows[i].features()[j - 1]
            }
        });
        let targets = DVector::from_fn(rows.len(), |i, _| rows[i].target_bid);
        let svd = design.svd(true, true);
        let params = svd
            .solve(&targets, 1e-10)
            .map_err(|e| Error::Fit(e.to_string()))?;
        self.params = Some(params);
        Ok(())
    }

    pub fn predict(&self, median_forecast: f64, spread_feature: f64, slot: u32) -> Result<f64> {
        let params = self
            .params
            .as_ref()
            .ok_or_else(|| Error::Unfitted("bid regressor has not been fitted".into()))?;
        let features = feature_vector(median_forecast, spread_feature, slot);
        Ok(params[0]
            + features
                .iter()
                .enumerate()
                .map(|(j, x)| params[j + 1] * x)
                .sum::<f64>())
    }

    /// Intercept followed by the coefficients on
    /// (median forecast, spread feature, slot sin, slot cos).
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        self.params.as_ref().map(|p| p.iter().copied().collect())
    }
}

/// Learned bid for one period, clipped to the configured bounds.
pub fn bid_learned(
    regressor: &BidRegressor,
    forecast: &QuantileForecast,
    spread_feature: f64,
    config: &StrategyConfig,
) -> Result<f64> {
    let raw = regressor.predict(forecast.median(), spread_feature, forecast.period.slot())?;
    Ok(config.clip(raw))
}

/// Settlement prices visible at a submission deadline given the availability lag.
pub fn prices_available_at(
    prices: &BTreeMap<Period, MarketPrices>,
    deadline: DateTime<Utc>,
) -> Vec<MarketPrices> {
    prices
        .values()
        .filter(|p| p.period.start() + Duration::days(PRICE_AVAILABILITY_LAG_DAYS) <= deadline)
        .copied()
        .collect()
}

/// Production observations visible at a submission deadline.
pub fn actuals_available_at(
    actuals: &BTreeMap<Period, f64>,
    deadline: DateTime<Utc>,
) -> BTreeMap<Period, f64> {
    actuals
        .iter()
        .filter(|(p, _)| p.start() + Duration::days(PRICE_AVAILABILITY_LAG_DAYS) <= deadline)
        .map(|(p, &v)| (*p, v))
        .collect()
}

/// The per-day driver used by backtests: computes one bid per period of the
/// delivery day, using only information available at its deadline.
pub fn bids_for_delivery_day(
    kind: StrategyKind,
    day_periods: &[Period],
    forecasts: &BTreeMap<Period, QuantileForecast>,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    config: &StrategyConfig,
    convention: DayConvention,
) -> Result<BTreeMap<Period, f64>> {
    config.validate()?;
    let mut bids = BTreeMap::new();
    let Some(&first) = day_periods.first() else {
        return Ok(bids);
    };
    let deadline = crate::time::submission_deadline(first.market_day(convention));
    let visible_prices = prices_available_at(prices, deadline);
    let price_map: BTreeMap<Period, MarketPrices> =
        visible_prices.iter().map(|p| (p.period, *p)).collect();

    let mut regressor = BidRegressor::new();
    if kind == StrategyKind::Learned {
        let visible_actuals = actuals_available_at(actuals, deadline);
        let table = build_optimal_bid_dataset(
            forecasts,
            &price_map,
            &visible_actuals,
            config.k,
            config.climatology_window_days,
            convention,
            Some(deadline),
        )?;
        regressor.fit(&table.rows)?;
    }

    for &period in day_periods {
        let Some(forecast) = forecasts.get(&period) else {
            continue;
        };
        let bid = match kind {
            StrategyKind::Median => bid_median(forecast, config),
            StrategyKind::ExpectedOptimal => {
                let spread = climatological_spread(
                    &visible_prices,
                    period,
                    config.climatology_window_days,
                )?;
                bid_expected_optimal(forecast, &spread, config)
            }
            StrategyKind::Learned => {
                let spread = climatological_spread(
                    &visible_prices,
                    period,
                    config.climatology_window_days,
                )?;
                bid_learned(&regressor, forecast, spread.mean_spread, config)?
            }
        };
        bids.insert(period, bid);
    }
    Ok(bids)
}
