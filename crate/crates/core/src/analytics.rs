//! Trading and skill analytics over a team's replayed series.

use crate::error::{Error, Result};
use crate::market::{self, MarketImpactCoefficient, MarketPrices, TradePosition};
use crate::quantiles::empirical_quantile;
use crate::scoring::period_pinball;
use crate::team::TeamSeries;
use crate::time::Period;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;

/// Per-period revenue of a team's bids settled against prices and production.
#[derive(Debug, Clone)]
pub struct RevenueSeries {
    pub per_period: Vec<(Period, f64)>,
    pub total: f64,
    /// Periods in the team series lacking a price or an actual.
    pub excluded: Vec<Period>,
}

pub fn revenue_series(
    team: &TeamSeries,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    k: MarketImpactCoefficient,
) -> Result<RevenueSeries> {
    let mut per_period = Vec::new();
    let mut excluded = Vec::new();
    for (&period, entry) in &team.entries {
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            excluded.push(period);
            continue;
        };
        let position = TradePosition {
            period,
            bid: entry.bid,
            production,
        };
        per_period.push((period, market::settle_revenue(price, &position, k)?));
    }
    let total = per_period.iter().map(|(_, r)| r).sum();
    Ok(RevenueSeries {
        per_period,
        total,
        excluded,
    })
}

/// Opportunity cost per MWh traded for one period, paired with that period's
/// pinball score for skill binning.
#[derive(Debug, Clone, Copy)]
pub struct OpportunityCostRow {
    pub period: Period,
    pub cost_per_mwh: f64,
    pub pinball: f64,
}

/// Maximum-achievable minus achieved revenue, per unit volume traded.
/// Periods with bid volume at or below `volume_epsilon` are excluded.
pub fn opportunity_cost(
    team: &TeamSeries,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    k: MarketImpactCoefficient,
    volume_epsilon: f64,
) -> Result<Vec<OpportunityCostRow>> {
    let mut rows = Vec::new();
    for (&period, entry) in &team.entries {
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            continue;
        };
        if entry.bid <= volume_epsilon {
            continue;
        }
        let position = TradePosition {
            period,
            bid: entry.bid,
            production,
        };
        let achieved = market::settle_revenue(price, &position, k)?;
        let best = market::max_revenue(production, price, k)?;
        rows.push(OpportunityCostRow {
            period,
            // the maximum is a true maximum, so clamp tiny negative rounding
            cost_per_mwh: ((best - achieved) / entry.bid).max(0.0),
            pinball: period_pinball(&entry.forecast, production)?,
        });
    }
    Ok(rows)
}

fn median_of(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Some(empirical_quantile(&values, 0.5))
}

/// Median of achieved revenue over maximum revenue, grouped by slot of day.
/// Periods with non-positive maximum revenue are excluded.
pub fn capture_ratio(
    team: &TeamSeries,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    k: MarketImpactCoefficient,
) -> Result<BTreeMap<u32, f64>> {
    let mut by_slot: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (&period, entry) in &team.entries {
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            continue;
        };
        let best = market::max_revenue(production, price, k)?;
        if best <= 0.0 {
            continue;
        }
        let position = TradePosition {
            period,
            bid: entry.bid,
            production,
        };
        let achieved = market::settle_revenue(price, &position, k)?;
        by_slot.entry(period.slot()).or_default().push(achieved / best);
    }
    Ok(by_slot
        .into_iter()
        .filter_map(|(slot, ratios)| median_of(ratios).map(|m| (slot, m)))
        .collect())
}

/// Summary statistics of per-period revenue. Ratios that are undefined on the
/// given series (zero variance, no negative revenue, zero volume) are None.
#[derive(Debug, Clone)]
pub struct TradeStats {
    pub periods: usize,
    pub win_rate: f64,
    pub relative_bid_volume: Option<f64>,
    pub trade_vwap: Option<f64>,
    pub production_vwap: Option<f64>,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub var5: f64,
    pub es5: Option<f64>,
    pub total_revenue: f64,
}

fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    (sd > 0.0).then_some(sd)
}

pub fn trade_stats(
    team: &TeamSeries,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
    k: MarketImpactCoefficient,
    var_level: f64,
) -> Result<TradeStats> {
    if !(var_level > 0.0 && var_level < 1.0) {
        return Err(Error::InvalidLevel(var_level));
    }
    let mut revenues = Vec::new();
    let mut bid_sum = 0.0;
    let mut production_sum = 0.0;
    let mut da_value_sum = 0.0;
    for (&period, entry) in &team.entries {
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            continue;
        };
        let position = TradePosition {
            period,
            bid: entry.bid,
            production,
        };
        revenues.push(market::settle_revenue(price, &position, k)?);
        bid_sum += entry.bid;
        production_sum += production;
        da_value_sum += entry.bid * price.da_price;
    }
    if revenues.is_empty() {
        return Err(Error::EmptyEvaluation("no settled periods".into()));
    }

    let n = revenues.len() as f64;
    let total_revenue: f64 = revenues.iter().sum();
    let mean = total_revenue / n;
    let win_rate = revenues.iter().filter(|&&r| r > 0.0).count() as f64 / n;

    let mut sorted = revenues.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let var5 = empirical_quantile(&sorted, var_level);
    let tail: Vec<f64> = sorted.iter().copied().take_while(|&r| r < var5).collect();
    let es5 = (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64);

    let negatives: Vec<f64> = revenues.iter().copied().filter(|&r| r < 0.0).collect();

    Ok(TradeStats {
        periods: revenues.len(),
        win_rate,
        relative_bid_volume: (production_sum > 0.0).then(|| bid_sum / production_sum),
        trade_vwap: (bid_sum > 0.0).then(|| da_value_sum / bid_sum),
        production_vwap: (production_sum > 0.0).then(|| total_revenue / production_sum),
        sharpe: sample_sd(&revenues).map(|sd| mean / sd),
        sortino: sample_sd(&negatives).map(|sd| mean / sd),
        var5,
        es5,
        total_revenue,
    })
}

/// Fractions of decidable periods in which bids deviated from the median
/// forecast toward the profitable side of the realised spread, and in which
/// the imbalance ended up on the profitable side. Periods with zero spread or
/// zero deviation/imbalance are excluded from the denominators; a fraction is
/// None when no period is decidable.
#[derive(Debug, Clone, Copy)]
pub struct DirectionStats {
    pub correct_bid_direction: Option<f64>,
    pub imbalance_opposite_spread: Option<f64>,
    pub decidable_bids: usize,
    pub decidable_imbalances: usize,
}

pub fn direction_stats(
    team: &TeamSeries,
    prices: &BTreeMap<Period, MarketPrices>,
    actuals: &BTreeMap<Period, f64>,
) -> DirectionStats {
    let mut bid_hits = 0usize;
    let mut bid_total = 0usize;
    let mut imb_hits = 0usize;
    let mut imb_total = 0usize;
    for (&period, entry) in &team.entries {
        let (Some(price), Some(&production)) = (prices.get(&period), actuals.get(&period)) else {
            continue;
        };
        let spread = market::price_spread(price);
        if spread == 0.0 {
            continue;
        }
        // Positive spread rewards a positive imbalance (deliver more than
        // sold), so the profitable deviation has the same sign as the spread.
        let deviation = entry.forecast.median() - entry.bid;
        if deviation != 0.0 {
            bid_total += 1;
            if deviation.signum() == spread.signum() {
                bid_hits += 1;
            }
        }
        let imbalance = production - entry.bid;
        if imbalance != 0.0 {
            imb_total += 1;
            if imbalance.signum() == spread.signum() {
                imb_hits += 1;
            }
        }
    }
    DirectionStats {
        correct_bid_direction: (bid_total > 0).then(|| bid_hits as f64 / bid_total as f64),
        imbalance_opposite_spread: (imb_total > 0).then(|| imb_hits as f64 / imb_total as f64),
        decidable_bids: bid_total,
        decidable_imbalances: imb_total,
    }
}

/// Fixed-width histogram of strategic bid volumes (median forecast minus bid).
#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.lo + self.bin_width * i as f64)
            .collect()
    }
}

pub fn strategic_bid_histogram(
    team: &TeamSeries,
    bin_width: f64,
    lo: f64,
    hi: f64,
) -> Result<Histogram> {
    if !(bin_width > 0.0 && lo < hi) {
        return Err(Error::InvalidInput(format!(
            "bad histogram range [{lo}, {hi}) with width {bin_width}"
        )));
    }
    let bins = ((hi - lo) / bin_width).ceil() as usize;
    let mut counts = vec![0u64; bins];
    let mut underflow = 0u64;
    let mut overflow = 0u64;
    for entry in team.entries.values() {
        let v = entry.forecast.median() - entry.bid;
        if v < lo {
            underflow += 1;
        } else if v >= lo + bin_width * bins as f64 {
            overflow += 1;
        } else {
            counts[((v - lo) / bin_width) as usize] += 1;
        }
    }
    Ok(Histogram {
        lo,
        bin_width,
        counts,
        underflow,
        overflow,
    })
}

/// One team's final scores for the skill-value regression.
#[derive(Debug, Clone)]
pub struct SkillPoint {
    pub team: String,
    pub pinball: f64,
    pub revenue_millions: f64,
}

/// Least-squares fit of revenue on pinball with its 95% slope interval.
#[derive(Debug, Clone)]
pub struct SkillValueFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci95: (f64, f64),
    pub excluded: Vec<String>,
    pub n_used: usize,
}

/// Regress total revenue (GBP millions) on pinball score over teams below the
/// pinball threshold, minus named outliers. The slope interval is the
/// standard t-based one with n-2 degrees of freedom.
pub fn skill_value_regression(
    points: &[SkillPoint],
    pinball_threshold: f64,
    outlier_exclusions: &[String],
) -> Result<SkillValueFit> {
    let mut excluded = Vec::new();
    let mut used: Vec<&SkillPoint> = Vec::new();
    for p in points {
        if p.pinball >= pinball_threshold || outlier_exclusions.contains(&p.team) {
            excluded.push(p.team.clone());
        } else {
            used.push(p);
        }
    }
    let n = used.len();
    if n < 3 {
        return Err(Error::Fit(format!(
            "{n} teams after exclusions; need at least 3"
        )));
    }
    let nf = n as f64;
    let mean_x = used.iter().map(|p| p.pinball).sum::<f64>() / nf;
    let mean_y = used.iter().map(|p| p.revenue_millions).sum::<f64>() / nf;
    let sxx: f64 = used.iter().map(|p| (p.pinball - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("pinball scores are all identical".into()));
    }
    let sxy: f64 = used
        .iter()
        .map(|p| (p.pinball - mean_x) * (p.revenue_millions - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = used
        .iter()
        .map(|p| {
            let r = p.revenue_millions - (intercept + slope * p.pinball);
            r * r
        })
        .sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let ci95 = if se > 0.0 {
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .expect("valid dof")
            .inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    } else {
        (slope, slope)
    };
    Ok(SkillValueFit {
        slope,
        intercept,
        ci95,
        excluded,
        n_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::QuantileForecast;
    use approx::assert_relative_eq;

    fn p(s: &str) -> Period {
        Period::parse(s).unwrap()
    }

    fn flat_forecast(period: Period, v: f64) -> QuantileForecast {
        QuantileForecast::new(period, [v; 9]).unwrap()
    }

    struct Fixture {
        team: TeamSeries,
        prices: BTreeMap<Period, MarketPrices>,
        actuals: BTreeMap<Period, f64>,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                team: TeamSeries::default(),
                prices: BTreeMap::new(),
                actuals: BTreeMap::new(),
            }
        }

        fn push(&mut self, period: Period, bid: f64, y: f64, da: f64, ss: f64) {
            self.team.insert(period, flat_forecast(period, y), bid);
            self.prices.insert(
                period,
                MarketPrices {
                    period,
                    da_price: da,
                    ss_price: ss,
                },
            );
            self.actuals.insert(period, y);
        }
    }

    fn k() -> MarketImpactCoefficient {
        MarketImpactCoefficient::default()
    }

    #[test]
    fn revenue_series_single_period_example() {
        let mut fx = Fixture::new();
        fx.push(p("2024-02-20T12:00:00Z"), 90.0, 100.0, 50.0, 60.0);
        let series = revenue_series(&fx.team, &fx.prices, &fx.actuals, k()).unwrap();
        assert_eq!(series.per_period.len(), 1);
        assert_relative_eq!(series.per_period[0].1, 5093.0);
        assert_relative_eq!(series.total, 5093.0);
    }

    #[test]
    fn revenue_series_counts_gaps() {
        let mut fx = Fixture::new();
        fx.push(p("2024-02-20T12:00:00Z"), 90.0, 100.0, 50.0, 60.0);
        let orphan = p("2024-02-20T13:00:00Z");
        fx.team.insert(orphan, flat_forecast(orphan, 1.0), 1.0);
        let series = revenue_series(&fx.team, &fx.prices, &fx.actuals, k()).unwrap();
        assert_eq!(series.excluded, vec![orphan]);
    }

    #[test]
    fn zero_bids_zero_production_zero_revenue() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for _ in 0..10 {
            fx.push(period, 0.0, 0.0, 50.0, 80.0);
            period = period.next();
        }
        let series = revenue_series(&fx.team, &fx.prices, &fx.actuals, k()).unwrap();
        assert!(series.per_period.iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn opportunity_cost_examples() {
        let mut fx = Fixture::new();
        let p1 = p("2024-02-20T12:00:00Z");
        // bidding exactly x_opt: y=100, spread 14 => x_opt = 0 is excluded by
        // the volume filter, so use a spread of 0 where x_opt = y
        fx.push(p1, 100.0, 100.0, 50.0, 50.0);
        // the worked example: x=100, y=100, da=50, ss=64 => cost 7
        let p2 = p("2024-02-20T12:30:00Z");
        fx.push(p2, 100.0, 100.0, 50.0, 64.0);
        // x=0 is excluded
        let p3 = p("2024-02-20T13:00:00Z");
        fx.push(p3, 0.0, 100.0, 50.0, 64.0);

        let rows = opportunity_cost(&fx.team, &fx.prices, &fx.actuals, k(), 1e-9).unwrap();
        assert_eq!(rows.len(), 2);
        assert_relative_eq!(rows[0].cost_per_mwh, 0.0);
        assert_relative_eq!(rows[1].cost_per_mwh, 7.0);
        assert!(rows.iter().all(|r| r.period != p3));
        assert!(rows.iter().all(|r| r.cost_per_mwh >= 0.0));
    }

    #[test]
    fn capture_ratio_examples() {
        let mut fx = Fixture::new();
        // always bidding x_opt (zero spread => x_opt = y) gives ratio 1
        let mut period = p("2024-02-20T06:00:00Z");
        for _ in 0..6 {
            fx.push(period, 100.0, 100.0, 50.0, 50.0);
            period = period.next();
        }
        let ratios = capture_ratio(&fx.team, &fx.prices, &fx.actuals, k()).unwrap();
        assert!(ratios.values().all(|&r| (r - 1.0).abs() < 1e-12));

        // constructed group with ratios 0.8 / 0.9 / 1.0 in one slot
        let mut fx = Fixture::new();
        let slot_period = |d: u32| p(&format!("2024-03-{d:02}T10:00:00Z"));
        // max revenue = 5700 (y=100, da=50, ss=64); choose bids giving the
        // target ratios via the quadratic: R(x) = 5700 - 0.07*(x - 0)^2
        for (day, target) in [(1u32, 0.8f64), (2, 0.9), (3, 1.0)] {
            let deficit = (5700.0 * (1.0 - target) / 0.07).sqrt();
            fx.push(slot_period(day), deficit, 100.0, 50.0, 64.0);
        }
        let ratios = capture_ratio(&fx.team, &fx.prices, &fx.actuals, k()).unwrap();
        assert_eq!(ratios.len(), 1);
        assert_relative_eq!(ratios[&20], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn trade_stats_constructed_var_and_es() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        // 100 periods winning +10 and 5 losing -100, via zero-imbalance bids:
        // bid = y, revenue = y*da. Wins: y=1, da=10. Losses: y=10, da=-10.
        for i in 0..105 {
            if i < 100 {
                fx.push(period, 1.0, 1.0, 10.0, 10.0);
            } else {
                fx.push(period, 10.0, 10.0, -10.0, -10.0);
            }
            period = period.next();
        }
        let stats = trade_stats(&fx.team, &fx.prices, &fx.actuals, k(), 0.05).unwrap();
        // sort-and-slice oracle: sorted revenues are five -100s then 100 tens;
        // h = 104*0.05 = 5.2 lands between two +10s
        assert_relative_eq!(stats.var5, 10.0);
        assert_relative_eq!(stats.es5.unwrap(), -100.0);
        assert_relative_eq!(stats.win_rate, 100.0 / 105.0);
        assert!(stats.var5 >= stats.es5.unwrap());
        // five identical negatives have zero variance: sortino undefined
        assert!(stats.sortino.is_none());
        assert!(stats.sharpe.is_some());
    }

    #[test]
    fn trade_stats_flags_degenerate_series() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for _ in 0..25 {
            fx.push(period, 1.0, 1.0, 1.0, 1.0); // revenue +1 every period
            period = period.next();
        }
        let stats = trade_stats(&fx.team, &fx.prices, &fx.actuals, k(), 0.05).unwrap();
        assert_eq!(stats.win_rate, 1.0);
        assert_relative_eq!(stats.var5, 1.0);
        assert!(stats.sharpe.is_none(), "zero variance must flag sharpe");
        assert!(stats.sortino.is_none());
        assert!(stats.es5.is_none());
        assert_relative_eq!(stats.relative_bid_volume.unwrap(), 1.0);
        assert_relative_eq!(stats.trade_vwap.unwrap(), 1.0);
    }

    #[test]
    fn trade_stats_vwaps() {
        let mut fx = Fixture::new();
        fx.push(p("2024-02-20T00:00:00Z"), 100.0, 110.0, 50.0, 50.0);
        fx.push(p("2024-02-20T00:30:00Z"), 200.0, 190.0, 80.0, 80.0);
        let stats = trade_stats(&fx.team, &fx.prices, &fx.actuals, k(), 0.05).unwrap();
        // trade vwap = (100*50 + 200*80) / 300 = 70
        assert_relative_eq!(stats.trade_vwap.unwrap(), 70.0);
        assert_relative_eq!(stats.relative_bid_volume.unwrap(), 300.0 / 300.0);
        // production vwap = total revenue / total production
        let expected_total = stats.total_revenue;
        assert_relative_eq!(stats.production_vwap.unwrap(), expected_total / 300.0);
    }

    #[test]
    fn direction_stats_optimal_bidder_always_profitable_side() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for i in 0..40 {
            let spread = if i % 2 == 0 { 6.0 } else { -8.0 };
            let y = 300.0;
            let x_opt = y - spread / 0.14;
            fx.push(period, x_opt, y, 50.0, 50.0 + spread);
            period = period.next();
        }
        let stats = direction_stats(&fx.team, &fx.prices, &fx.actuals);
        assert_eq!(stats.imbalance_opposite_spread, Some(1.0));
        assert_eq!(stats.correct_bid_direction, Some(1.0));
    }

    #[test]
    fn direction_stats_flags_pure_median_bidder() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for _ in 0..10 {
            // bid equals the median forecast; forecast equals production, so
            // the imbalance set is empty too
            fx.push(period, 100.0, 100.0, 50.0, 60.0);
            period = period.next();
        }
        let stats = direction_stats(&fx.team, &fx.prices, &fx.actuals);
        assert_eq!(stats.decidable_bids, 0);
        assert!(stats.correct_bid_direction.is_none());
    }

    #[test]
    fn histogram_median_bidder_masses_at_zero() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for _ in 0..30 {
            fx.push(period, 100.0, 100.0, 50.0, 60.0);
            period = period.next();
        }
        let hist = strategic_bid_histogram(&fx.team, 25.0, -1000.0, 1000.0).unwrap();
        let zero_bin = ((0.0 - hist.lo) / hist.bin_width) as usize;
        assert_eq!(hist.counts[zero_bin], 30);
        assert_eq!(hist.counts.iter().sum::<u64>(), 30);
    }

    #[test]
    fn histogram_shifted_bidder() {
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for _ in 0..12 {
            // bid = median - 100 => strategic volume +100
            fx.push(period, 200.0, 300.0, 50.0, 60.0);
            period = period.next();
        }
        let hist = strategic_bid_histogram(&fx.team, 25.0, -1000.0, 1000.0).unwrap();
        let bin_of_100 = ((100.0 - hist.lo) / hist.bin_width) as usize;
        assert_eq!(hist.counts[bin_of_100], 12);
    }

    #[test]
    fn histogram_matches_counting_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut fx = Fixture::new();
        let mut period = p("2024-02-20T00:00:00Z");
        let mut values = Vec::new();
        for _ in 0..500 {
            let median: f64 = rng.gen_range(100.0..900.0);
            let deviation: f64 = rng.gen_range(-400.0..400.0);
            fx.team
                .insert(period, flat_forecast(period, median), median - deviation);
            values.push(deviation);
            period = period.next();
        }
        let hist = strategic_bid_histogram(&fx.team, 25.0, -500.0, 500.0).unwrap();
        // independent binning
        let mut oracle = vec![0u64; 40];
        for v in values {
            let idx = ((v - (-500.0)) / 25.0).floor() as i64;
            if (0..40).contains(&idx) {
                oracle[idx as usize] += 1;
            }
        }
        assert_eq!(hist.counts, oracle);
    }

    #[test]
    fn skill_regression_exact_line() {
        let points: Vec<SkillPoint> = (0..8)
            .map(|i| {
                let pinball = 20.0 + i as f64;
                SkillPoint {
                    team: format!("t{i}"),
                    pinball,
                    revenue_millions: -0.2 * pinball + 100.0,
                }
            })
            .collect();
        let fit = skill_value_regression(&points, 31.0, &[]).unwrap();
        assert_relative_eq!(fit.slope, -0.2, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 100.0, epsilon = 1e-10);
        assert!((fit.ci95.1 - fit.ci95.0).abs() < 1e-9);
    }

    #[test]
    fn skill_regression_matches_normal_equations_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<SkillPoint> = (0..10)
            .map(|i| {
                let pinball = 21.0 + i as f64;
                SkillPoint {
                    team: format!("t{i}"),
                    pinball,
                    revenue_millions: 95.0 - 0.3 * pinball + rng.gen_range(-0.5..0.5),
                }
            })
            .collect();
        let fit = skill_value_regression(&points, 1e9, &[]).unwrap();

        // independent closed-form oracle via raw sums
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.pinball).sum();
        let sy: f64 = points.iter().map(|p| p.revenue_millions).sum();
        let sxx: f64 = points.iter().map(|p| p.pinball * p.pinball).sum();
        let sxy: f64 = points.iter().map(|p| p.pinball * p.revenue_millions).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        assert_relative_eq!(fit.slope, slope, epsilon = 1e-10);
        assert_relative_eq!(fit.intercept, intercept, epsilon = 1e-10);

        let sse: f64 = points
            .iter()
            .map(|p| (p.revenue_millions - intercept - slope * p.pinball).powi(2))
            .sum();
        let se = (sse / (n - 2.0) / (sxx - sx * sx / n)).sqrt();
        // t quantile for 8 dof
        let t = 2.306004135204166;
        assert_relative_eq!(fit.ci95.0, slope - t * se, epsilon = 1e-6);
        assert_relative_eq!(fit.ci95.1, slope + t * se, epsilon = 1e-6);
    }

    #[test]
    fn skill_regression_requires_three_teams() {
        let points: Vec<SkillPoint> = (0..2)
            .map(|i| SkillPoint {
                team: format!("t{i}"),
                pinball: 20.0 + i as f64,
                revenue_millions: 80.0,
            })
            .collect();
        assert!(skill_value_regression(&points, 31.0, &[]).is_err());
    }
}
