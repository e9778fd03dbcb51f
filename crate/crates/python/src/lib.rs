//! Python bindings for the settlement, scoring, quantile, and analytics
//! primitives. The surface is numeric: periods are handled on the Rust side
//! of the full replay and do not appear here.

// the pyfunction macro expansion triggers this on its own error plumbing
#![allow(clippy::useless_conversion)]

use heftcom_replay::analytics;
use heftcom_replay::market;
use heftcom_replay::quantiles;
use heftcom_replay::scoring;
use heftcom_replay::team::TeamSeries;
use heftcom_replay::time::Period;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: heftcom_replay::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Fixed placeholder period for the math-level API.
fn anchor() -> Period {
    Period::parse("2024-02-20T00:00:00Z").expect("valid anchor")
}

fn nth_period(i: usize) -> Period {
    let mut p = anchor();
    for _ in 0..i {
        p = p.next();
    }
    p
}

fn forecast_from(values: [f64; 9]) -> PyResult<scoring::QuantileForecast> {
    scoring::QuantileForecast::new(anchor(), values).map_err(err)
}

#[pyfunction]
fn pinball_loss(y: f64, q: f64, alpha: f64) -> PyResult<f64> {
    scoring::pinball_loss(y, q, alpha).map_err(err)
}

/// Mean pinball score over aligned rows of nine quantiles and actuals.
#[pyfunction]
fn mean_pinball(quantile_rows: Vec<[f64; 9]>, actuals: Vec<f64>) -> PyResult<f64> {
    if quantile_rows.len() != actuals.len() || quantile_rows.is_empty() {
        return Err(PyValueError::new_err(format!(
            "need equal nonempty lists, got {} rows and {} actuals",
            quantile_rows.len(),
            actuals.len()
        )));
    }
    let mut total = 0.0;
    for (values, &y) in quantile_rows.iter().zip(&actuals) {
        let forecast = forecast_from(*values)?;
        total += scoring::period_pinball(&forecast, y).map_err(err)?;
    }
    Ok(total / actuals.len() as f64)
}

/// Empirical coverage at each of the nine levels.
#[pyfunction]
fn reliability(quantile_rows: Vec<[f64; 9]>, actuals: Vec<f64>) -> PyResult<[f64; 9]> {
    if quantile_rows.len() != actuals.len() || quantile_rows.is_empty() {
        return Err(PyValueError::new_err("need equal nonempty lists"));
    }
    let mut counts = [0usize; 9];
    for (values, &y) in quantile_rows.iter().zip(&actuals) {
        for i in 0..9 {
            if y <= values[i] {
                counts[i] += 1;
            }
        }
    }
    Ok(counts.map(|c| c as f64 / actuals.len() as f64))
}

#[pyfunction]
#[pyo3(signature = (bid, production, da_price, ss_price, k = 0.07))]
fn settle_revenue(bid: f64, production: f64, da_price: f64, ss_price: f64, k: f64) -> PyResult<f64> {
    let period = anchor();
    market::settle_revenue(
        &market::MarketPrices {
            period,
            da_price,
            ss_price,
        },
        &market::TradePosition {
            period,
            bid,
            production,
        },
        market::MarketImpactCoefficient::new(k).map_err(err)?,
    )
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (bid, production, ss_price, k = 0.07))]
fn effective_imbalance_price(bid: f64, production: f64, ss_price: f64, k: f64) -> PyResult<f64> {
    let period = anchor();
    market::effective_imbalance_price(
        &market::MarketPrices {
            period,
            da_price: 0.0,
            ss_price,
        },
        &market::TradePosition {
            period,
            bid,
            production,
        },
        market::MarketImpactCoefficient::new(k).map_err(err)?,
    )
    .map_err(err)
}

#[pyfunction]
fn price_spread(da_price: f64, ss_price: f64) -> f64 {
    ss_price - da_price
}

#[pyfunction]
#[pyo3(signature = (production, da_price, ss_price, k = 0.07))]
fn optimal_bid(production: f64, da_price: f64, ss_price: f64, k: f64) -> PyResult<f64> {
    market::optimal_bid(
        production,
        &market::MarketPrices {
            period: anchor(),
            da_price,
            ss_price,
        },
        market::MarketImpactCoefficient::new(k).map_err(err)?,
    )
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (production, da_price, ss_price, k = 0.07))]
fn max_revenue(production: f64, da_price: f64, ss_price: f64, k: f64) -> PyResult<f64> {
    market::max_revenue(
        production,
        &market::MarketPrices {
            period: anchor(),
            da_price,
            ss_price,
        },
        market::MarketImpactCoefficient::new(k).map_err(err)?,
    )
    .map_err(err)
}

#[pyfunction]
fn sort_quantiles(values: [f64; 9]) -> PyResult<[f64; 9]> {
    Ok(quantiles::sort_quantiles(&forecast_from(values)?).values)
}

#[pyfunction]
fn clip_to_capacity(values: [f64; 9], capacity: f64) -> PyResult<[f64; 9]> {
    quantiles::clip_to_capacity(&forecast_from(values)?, capacity)
        .map(|f| f.values)
        .map_err(err)
}

#[pyfunction]
fn interpolated_mean(values: [f64; 9]) -> f64 {
    quantiles::interpolated_mean(&values)
}

/// Combine wind and solar quantiles; `rho = 1` adds level-wise, otherwise a
/// seeded Gaussian-dependence Monte Carlo is used.
#[pyfunction]
#[pyo3(signature = (wind, solar, rho = 1.0, sample_count = 100_000, seed = 0))]
fn aggregate_hybrid(
    wind: [f64; 9],
    solar: [f64; 9],
    rho: f64,
    sample_count: usize,
    seed: u64,
) -> PyResult<[f64; 9]> {
    let config = quantiles::AggregationConfig::new(rho, sample_count, seed).map_err(err)?;
    quantiles::aggregate_hybrid(&forecast_from(wind)?, &forecast_from(solar)?, &config)
        .map(|f| f.values)
        .map_err(err)
}

/// Linear quantile regression fitted by minimising empirical pinball loss.
#[pyclass]
struct QuantileRegression {
    model: quantiles::QuantileRegressionModel,
}

#[pymethods]
impl QuantileRegression {
    #[staticmethod]
    fn fit(covariates: Vec<Vec<f64>>, targets: Vec<f64>, level: f64) -> PyResult<Self> {
        let model = quantiles::fit_quantile_regression(
            &covariates,
            &targets,
            level,
            &quantiles::FitOptions::default(),
        )
        .map_err(err)?;
        Ok(QuantileRegression { model })
    }

    fn predict(&self, covariates: Vec<f64>) -> PyResult<f64> {
        self.model.predict(&covariates).map_err(err)
    }

    #[getter]
    fn level(&self) -> f64 {
        self.model.level
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.model.intercept
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.model.coefficients.clone()
    }
}

/// Summary trade statistics from aligned per-period lists.
#[pyfunction]
#[pyo3(signature = (bids, productions, da_prices, ss_prices, k = 0.07, var_level = 0.05))]
fn trade_stats<'py>(
    py: Python<'py>,
    bids: Vec<f64>,
    productions: Vec<f64>,
    da_prices: Vec<f64>,
    ss_prices: Vec<f64>,
    k: f64,
    var_level: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let n = bids.len();
    if productions.len() != n || da_prices.len() != n || ss_prices.len() != n || n == 0 {
        return Err(PyValueError::new_err("need equal nonempty lists"));
    }
    let mut series = TeamSeries::default();
    let mut prices = std::collections::BTreeMap::new();
    let mut actuals = std::collections::BTreeMap::new();
    for i in 0..n {
        let period = nth_period(i);
        series.insert(
            period,
            scoring::QuantileForecast::new(period, [productions[i].max(0.0); 9]).map_err(err)?,
            bids[i],
        );
        prices.insert(
            period,
            market::MarketPrices {
                period,
                da_price: da_prices[i],
                ss_price: ss_prices[i],
            },
        );
        actuals.insert(period, productions[i]);
    }
    let stats = analytics::trade_stats(
        &series,
        &prices,
        &actuals,
        market::MarketImpactCoefficient::new(k).map_err(err)?,
        var_level,
    )
    .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("periods", stats.periods)?;
    out.set_item("win_rate", stats.win_rate)?;
    out.set_item("relative_bid_volume", stats.relative_bid_volume)?;
    out.set_item("trade_vwap", stats.trade_vwap)?;
    out.set_item("production_vwap", stats.production_vwap)?;
    out.set_item("sharpe", stats.sharpe)?;
    out.set_item("sortino", stats.sortino)?;
    out.set_item("var5", stats.var5)?;
    out.set_item("es5", stats.es5)?;
    out.set_item("total_revenue", stats.total_revenue)?;
    Ok(out)
}

/// Least-squares fit of revenue (millions) on pinball below a threshold,
/// minus named outliers. Returns (slope, intercept, ci_low, ci_high, n_used).
#[pyfunction]
#[pyo3(signature = (teams, pinballs, revenues_millions, threshold = 31.0, exclusions = vec![]))]
fn skill_value_regression(
    teams: Vec<String>,
    pinballs: Vec<f64>,
    revenues_millions: Vec<f64>,
    threshold: f64,
    exclusions: Vec<String>,
) -> PyResult<(f64, f64, f64, f64, usize)> {
    if teams.len() != pinballs.len() || teams.len() != revenues_millions.len() {
        return Err(PyValueError::new_err("need equal-length lists"));
    }
    let points: Vec<analytics::SkillPoint> = teams
        .into_iter()
        .zip(pinballs)
        .zip(revenues_millions)
        .map(|((team, pinball), revenue_millions)| analytics::SkillPoint {
            team,
            pinball,
            revenue_millions,
        })
        .collect();
    let fit = analytics::skill_value_regression(&points, threshold, &exclusions).map_err(err)?;
    Ok((fit.slope, fit.intercept, fit.ci95.0, fit.ci95.1, fit.n_used))
}

#[pymodule]
fn heftcom_replay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pinball_loss, m)?)?;
    m.add_function(wrap_pyfunction!(mean_pinball, m)?)?;
    m.add_function(wrap_pyfunction!(reliability, m)?)?;
    m.add_function(wrap_pyfunction!(settle_revenue, m)?)?;
    m.add_function(wrap_pyfunction!(effective_imbalance_price, m)?)?;
    m.add_function(wrap_pyfunction!(price_spread, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_bid, m)?)?;
    m.add_function(wrap_pyfunction!(max_revenue, m)?)?;
    m.add_function(wrap_pyfunction!(sort_quantiles, m)?)?;
    m.add_function(wrap_pyfunction!(clip_to_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(interpolated_mean, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_hybrid, m)?)?;
    m.add_function(wrap_pyfunction!(trade_stats, m)?)?;
    m.add_function(wrap_pyfunction!(skill_value_regression, m)?)?;
    m.add_class::<QuantileRegression>()?;
    Ok(())
}
