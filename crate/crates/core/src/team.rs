//! A team's submitted series: per-period forecasts and bids.

use crate::scoring::QuantileForecast;
use crate::time::Period;
use std::collections::BTreeMap;

/// One settlement period of a team's submission.
#[derive(Debug, Clone)]
pub struct SubmissionEntry {
    pub forecast: QuantileForecast,
    pub bid: f64,
    /// True when the entry came from benchmark filling rather than the team.
    pub filled: bool,
}

/// A team's forecasts and bids over the competition window, keyed by period.
#[derive(Debug, Clone, Default)]
pub struct TeamSeries {
    pub entries: BTreeMap<Period, SubmissionEntry>,
}

impl TeamSeries {
    pub fn insert(&mut self, period: Period, forecast: QuantileForecast, bid: f64) {
        self.entries.insert(
            period,
            SubmissionEntry {
                forecast,
                bid,
                filled: false,
            },
        );
    }

    pub fn periods(&self) -> impl Iterator<Item = Period> + '_ {
        self.entries.keys().copied()
    }

    pub fn forecasts(&self) -> Vec<QuantileForecast> {
        self.entries.values().map(|e| e.forecast.clone()).collect()
    }

    pub fn filled_period_count(&self) -> usize {
        self.entries.values().filter(|e| e.filled).count()
    }
}
