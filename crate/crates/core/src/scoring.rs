//! Probabilistic forecast evaluation with the pinball (quantile) score.

use crate::error::{Error, Result};
use crate::time::{DayWindow, Period, Window};
use std::collections::BTreeMap;

/// The nine target probability levels, 10% through 90%.
pub const LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Nine quantiles of a production forecast for one settlement period, MWh.
/// Values are stored by ascending level; `values[4]` is the median.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub period: Period,
    pub values: [f64; 9],
}

impl QuantileForecast {
    pub fn new(period: Period, values: [f64; 9]) -> Result<Self> {
        for v in values {
            if !v.is_finite() {
                return Err(Error::not_finite("quantile", v));
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("negative quantile {v}")));
            }
        }
        Ok(QuantileForecast { period, values })
    }

    pub fn median(&self) -> f64 {
        self.values[4]
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Pinball loss of a single quantile against an outcome.
pub fn pinball_loss(y: f64, q: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel(alpha));
    }
    if !y.is_finite() {
        return Err(Error::not_finite("observation", y));
    }
    if !q.is_finite() {
        return Err(Error::not_finite("quantile", q));
    }
    if y >= q {
        Ok((y - q) * alpha)
    } else {
        Ok((q - y) * (1.0 - alpha))
    }
}

/// Mean pinball loss over the nine levels for one period.
pub fn period_pinball(forecast: &QuantileForecast, actual: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, &alpha) in LEVELS.iter().enumerate() {
        total += pinball_loss(actual, forecast.values[i], alpha)?;
    }
    Ok(total / LEVELS.len() as f64)
}

/// Pinball score of a forecast series: per-period scores plus overall and
/// day/night means. Daytime is 08:00-20:00 UTC by period start.
#[derive(Debug, Clone)]
pub struct PinballResult {
    pub per_period: Vec<(Period, f64)>,
    pub overall: f64,
    pub daytime: Option<f64>,
    pub overnight: Option<f64>,
    /// Forecast periods dropped because no actual was available.
    pub missing_actuals: Vec<Period>,
}

/// Score a forecast series against actual production.
///
/// Only periods inside `window` (when given) enter the evaluation. Periods
/// with a forecast but no actual are excluded from every mean and reported in
/// `missing_actuals`. Input ordering is irrelevant; periods are keyed by id,
/// duplicates last-wins.
pub fn score_series(
    forecasts: &[QuantileForecast],
    actuals: &BTreeMap<Period, f64>,
    window: Option<&Window>,
) -> Result<PinballResult> {
    let mut by_period: BTreeMap<Period, &QuantileForecast> = BTreeMap::new();
    for f in forecasts {
        if window.is_none_or(|w| w.contains(f.period)) {
            by_period.insert(f.period, f);
        }
    }

    let mut per_period = Vec::new();
    let mut missing = Vec::new();
    for (&period, forecast) in &by_period {
        match actuals.get(&period) {
            Some(&y) => per_period.push((period, period_pinball(forecast, y)?)),
            None => missing.push(period),
        }
    }
    if per_period.is_empty() {
        return Err(Error::EmptyEvaluation(
            "no forecast period has a matching actual".into(),
        ));
    }

    let mean_over = |filter: DayWindow| -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &(p, s) in &per_period {
            if filter.includes(p) {
                sum += s;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    };

    Ok(PinballResult {
        overall: mean_over(DayWindow::All).expect("nonempty"),
        daytime: mean_over(DayWindow::Daytime),
        overnight: mean_over(DayWindow::Overnight),
        per_period,
        missing_actuals: missing,
    })
}

/// Expanding mean of per-period scores in chronological order; element `n` is
/// the mean of the first `n + 1` scores.
pub fn expanding_pinball(per_period: &[(Period, f64)]) -> Vec<(Period, f64)> {
    let mut out = Vec::with_capacity(per_period.len());
    let mut sum = 0.0;
    for (i, &(p, s)) in per_period.iter().enumerate() {
        sum += s;
        out.push((p, sum / (i + 1) as f64));
    }
    out
}

/// Empirical coverage per level: the fraction of evaluated periods with
/// `y <= q_alpha` (ties count as covered). Restricted to the given part of
/// day; errors when no period falls in it.
pub fn reliability_diagram(
    forecasts: &[QuantileForecast],
    actuals: &BTreeMap<Period, f64>,
    filter: DayWindow,
) -> Result<[f64; 9]> {
    let mut counts = [0usize; 9];
    let mut n = 0usize;
    let mut by_period: BTreeMap<Period, &QuantileForecast> = BTreeMap::new();
    for f in forecasts {
        by_period.insert(f.period, f);
    }
    for (&period, forecast) in &by_period {
        if !filter.includes(period) {
            continue;
        }
        let Some(&y) = actuals.get(&period) else {
            continue;
        };
        n += 1;
        for (count, &q) in counts.iter_mut().zip(&forecast.values) {
            if y <= q {
                *count += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation(format!(
            "no periods in the {} window",
            filter.label()
        )));
    }
    let mut coverage = [0.0; 9];
    for i in 0..9 {
        coverage[i] = counts[i] as f64 / n as f64;
    }
    Ok(coverage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(s: &str) -> Period {
        Period::parse(s).unwrap()
    }

    fn flat(period: Period, v: f64) -> QuantileForecast {
        QuantileForecast::new(period, [v; 9]).unwrap()
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball_loss(100.0, 100.0, 0.5).unwrap(), 0.0);
        assert_relative_eq!(pinball_loss(100.0, 120.0, 0.1).unwrap(), 18.0);
        assert_relative_eq!(pinball_loss(100.0, 80.0, 0.5).unwrap(), 10.0);
    }

    #[test]
    fn pinball_rejects_bad_level() {
        assert!(pinball_loss(1.0, 1.0, 0.0).is_err());
        assert!(pinball_loss(1.0, 1.0, 1.0).is_err());
        assert!(pinball_loss(1.0, 1.0, -0.2).is_err());
    }

    #[test]
    fn perfect_forecast_scores_zero() {
        let period = p("2024-02-20T10:00:00Z");
        let actuals = BTreeMap::from([(period, 55.0)]);
        let result = score_series(&[flat(period, 55.0)], &actuals, None).unwrap();
        assert_eq!(result.overall, 0.0);
        assert_eq!(result.daytime, Some(0.0));
        assert_eq!(result.overnight, None);
    }

    #[test]
    fn overall_is_mean_of_periods() {
        let p1 = p("2024-02-20T10:00:00Z");
        let p2 = p("2024-02-20T22:00:00Z");
        // flat forecast 20 above / below the actual at all levels gives a
        // per-period score of 20 * mean(max(a,1-a)) = 20 * (0.9+0.8+...)/9
        let actuals = BTreeMap::from([(p1, 100.0), (p2, 100.0)]);
        let f1 = flat(p1, 110.0);
        let f2 = flat(p2, 120.0);
        let result = score_series(&[f1.clone(), f2.clone()], &actuals, None).unwrap();
        let s1 = period_pinball(&f1, 100.0).unwrap();
        let s2 = period_pinball(&f2, 100.0).unwrap();
        assert_relative_eq!(result.overall, (s1 + s2) / 2.0);
        assert_eq!(result.daytime, Some(s1));
        assert_eq!(result.overnight, Some(s2));
    }

    #[test]
    fn missing_actuals_are_excluded_and_counted() {
        let p1 = p("2024-02-20T10:00:00Z");
        let p2 = p("2024-02-20T11:00:00Z");
        let actuals = BTreeMap::from([(p1, 50.0)]);
        let result = score_series(&[flat(p1, 50.0), flat(p2, 50.0)], &actuals, None).unwrap();
        assert_eq!(result.per_period.len(), 1);
        assert_eq!(result.missing_actuals, vec![p2]);
    }

    #[test]
    fn empty_intersection_errors() {
        let p1 = p("2024-02-20T10:00:00Z");
        let actuals = BTreeMap::from([(p("2024-02-21T10:00:00Z"), 1.0)]);
        assert!(score_series(&[flat(p1, 1.0)], &actuals, None).is_err());
    }

    #[test]
    fn score_is_order_invariant() {
        let p1 = p("2024-02-20T10:00:00Z");
        let p2 = p("2024-02-20T11:00:00Z");
        let actuals = BTreeMap::from([(p1, 10.0), (p2, 90.0)]);
        let a = score_series(&[flat(p1, 20.0), flat(p2, 70.0)], &actuals, None).unwrap();
        let b = score_series(&[flat(p2, 70.0), flat(p1, 20.0)], &actuals, None).unwrap();
        assert_eq!(a.overall, b.overall);
        assert_eq!(a.per_period, b.per_period);
    }

    #[test]
    fn expanding_mean_examples() {
        let t = p("2024-02-20T00:00:00Z");
        let series = vec![(t, 10.0)];
        assert_eq!(expanding_pinball(&series)[0].1, 10.0);

        let series = vec![(t, 10.0), (t.next(), 20.0)];
        let out = expanding_pinball(&series);
        assert_eq!(out[0].1, 10.0);
        assert_eq!(out[1].1, 15.0);

        let series = vec![(t, 0.0), (t.next(), 0.0), (t.next().next(), 30.0)];
        let out = expanding_pinball(&series);
        assert_eq!(out.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0.0, 0.0, 10.0]);

        assert!(expanding_pinball(&[]).is_empty());
    }

    #[test]
    fn reliability_dominating_and_underforecast() {
        let mut forecasts = Vec::new();
        let mut actuals = BTreeMap::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for i in 0..20 {
            forecasts.push(flat(period, 1800.0));
            actuals.insert(period, 100.0 + i as f64);
            period = period.next();
        }
        let cov = reliability_diagram(&forecasts, &actuals, DayWindow::All).unwrap();
        assert!(cov.iter().all(|&c| c == 1.0));

        let under: Vec<_> = forecasts
            .iter()
            .map(|f| flat(f.period, 0.0))
            .collect();
        let cov = reliability_diagram(&under, &actuals, DayWindow::All).unwrap();
        assert!(cov.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn reliability_empty_window_errors() {
        let period = p("2024-02-20T10:00:00Z"); // daytime only
        let actuals = BTreeMap::from([(period, 1.0)]);
        let forecasts = vec![flat(period, 1.0)];
        assert!(reliability_diagram(&forecasts, &actuals, DayWindow::Overnight).is_err());
    }

    /// Simulation check: when forecast quantiles are the exact empirical
    /// quantiles of the sample being scored, coverage lands near each level.
    #[test]
    fn reliability_matches_empirical_quantiles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 2000;
        let sample: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1000.0)).collect();
        let mut sorted = sample.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut q = [0.0; 9];
        for (i, alpha) in LEVELS.iter().enumerate() {
            q[i] = sorted[((n as f64 * alpha) as usize).min(n - 1)];
        }
        let mut forecasts = Vec::new();
        let mut actuals = BTreeMap::new();
        let mut period = p("2024-02-20T00:00:00Z");
        for &y in &sample {
            forecasts.push(QuantileForecast::new(period, q).unwrap());
            actuals.insert(period, y);
            period = period.next();
        }
        let cov = reliability_diagram(&forecasts, &actuals, DayWindow::All).unwrap();
        for (i, &alpha) in LEVELS.iter().enumerate() {
            // three-sigma binomial band around the nominal level
            let band = 3.0 * (alpha * (1.0 - alpha) / n as f64).sqrt();
            assert!(
                (cov[i] - alpha).abs() < band + 1.0 / n as f64,
                "level {alpha}: coverage {} outside band {band}",
                cov[i]
            );
        }
    }

    proptest! {
        /// Non-negativity, zero-iff-equal, and scale equivariance.
        #[test]
        fn pinball_basic_properties(
            y in 0.0..2000.0f64,
            q in 0.0..2000.0f64,
            level_idx in 0usize..9,
            c in 0.1..50.0f64,
        ) {
            let alpha = LEVELS[level_idx];
            let loss = pinball_loss(y, q, alpha).unwrap();
            prop_assert!(loss >= 0.0);
            if loss == 0.0 {
                prop_assert_eq!(y, q);
            }
            prop_assert_eq!(pinball_loss(y, y, alpha).unwrap(), 0.0);
            let scaled = pinball_loss(c * y, c * q, alpha).unwrap();
            prop_assert!((scaled - c * loss).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }

        /// Piecewise-linear convexity: subgradient is -alpha left of y and
        /// 1-alpha right of y (finite differences).
        #[test]
        fn pinball_subgradients(
            y in 100.0..1000.0f64,
            level_idx in 0usize..9,
            gap in 1.0..50.0f64,
        ) {
            let alpha = LEVELS[level_idx];
            let h = 1e-3;
            let q_left = y - gap;
            let left_slope =
                (pinball_loss(y, q_left + h, alpha).unwrap() - pinball_loss(y, q_left, alpha).unwrap()) / h;
            prop_assert!((left_slope + alpha).abs() < 1e-6);
            let q_right = y + gap;
            let right_slope =
                (pinball_loss(y, q_right + h, alpha).unwrap() - pinball_loss(y, q_right, alpha).unwrap()) / h;
            prop_assert!((right_slope - (1.0 - alpha)).abs() < 1e-6);
        }

        /// Monotone quantiles give monotone coverage.
        #[test]
        fn coverage_monotone_for_monotone_quantiles(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut forecasts = Vec::new();
            let mut actuals = BTreeMap::new();
            let mut period = p("2024-02-20T00:00:00Z");
            for _ in 0..100 {
                let base: f64 = rng.gen_range(0.0..500.0);
                let mut q = [0.0; 9];
                for (i, slot) in q.iter_mut().enumerate() {
                    *slot = base + 10.0 * i as f64 * rng.gen_range(0.0..2.0);
                }
                let mut sorted = q;
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                forecasts.push(QuantileForecast::new(period, sorted).unwrap());
                actuals.insert(period, rng.gen_range(0.0..700.0));
                period = period.next();
            }
            let cov = reliability_diagram(&forecasts, &actuals, DayWindow::All).unwrap();
            for w in cov.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }
    }
}
