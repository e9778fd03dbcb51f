//! Synthetic archive fixture shared by the integration tests.
//!
//! Builds a small but complete data directory: production, prices with a
//! slot-patterned spread, and a handful of teams with distinct behaviours
//! (sharp forecaster, noisy forecaster, strategic bidder, benchmark, teams
//! with missed days or no report). Deterministic for a given seed.

// each integration test target compiles this module and uses its own subset
#![allow(dead_code)]

use chrono::NaiveDate;
use heftcom_replay::config::RunConfig;
use heftcom_replay::ingest::{write_prices, write_production, write_submissions, ProductionRow};
use heftcom_replay::market::MarketPrices;
use heftcom_replay::scoring::QuantileForecast;
use heftcom_replay::team::TeamSeries;
use heftcom_replay::time::{DayConvention, Period, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const WINDOW_START: &str = "2024-03-01";
pub const WINDOW_END: &str = "2024-03-20";

pub struct Fixture {
    pub data_dir: PathBuf,
    pub window: Window,
    /// True production total per window period.
    pub actuals: BTreeMap<Period, f64>,
    pub prices: BTreeMap<Period, MarketPrices>,
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Slot-dependent mean spread the strategic pieces can learn.
pub fn slot_spread(slot: u32) -> f64 {
    8.0 * (std::f64::consts::TAU * slot as f64 / 48.0).sin()
}

fn truth_at(period: Period, day_index: i64, rng: &mut ChaCha8Rng) -> f64 {
    let slot = period.slot() as f64;
    let wind = 200.0 + 150.0 * (day_index as f64 / 4.0).sin() + rng.gen_range(0.0..60.0);
    let solar = if (16..40).contains(&period.slot()) {
        300.0 * (std::f64::consts::PI * (slot - 16.0) / 24.0).sin().max(0.0)
    } else {
        0.0
    };
    wind + solar
}

fn quantiles_around(center: f64, spread: f64) -> [f64; 9] {
    let mut q = [0.0; 9];
    for (i, slot) in q.iter_mut().enumerate() {
        *slot = (center + spread * (i as f64 - 4.0)).max(0.0);
    }
    q
}

/// Build the archive under `dir` and return the in-memory truth.
pub fn build(dir: &Path, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = Window::new(date(WINDOW_START), date(WINDOW_END), DayConvention::GbLocal).unwrap();

    // prices cover a long pre-window run-up so climatology has history
    let price_start = date("2024-01-20");
    let mut prices: BTreeMap<Period, MarketPrices> = BTreeMap::new();
    let mut cursor = Period::from_utc_slot(price_start, 0).unwrap();
    let last = window.periods().last().copied().unwrap();
    while cursor <= last {
        let da = 45.0 + 15.0 * (cursor.slot() as f64 / 48.0 * std::f64::consts::TAU).cos()
            + rng.gen_range(-3.0..3.0);
        let ss = da + slot_spread(cursor.slot()) + rng.gen_range(-2.0..2.0);
        prices.insert(
            cursor,
            MarketPrices {
                period: cursor,
                da_price: da,
                ss_price: ss,
            },
        );
        cursor = cursor.next();
    }

    // production inside the window only
    let mut production: BTreeMap<Period, ProductionRow> = BTreeMap::new();
    let mut actuals: BTreeMap<Period, f64> = BTreeMap::new();
    for (day_index, day) in window.days().iter().enumerate() {
        for period in window.periods_of_day(*day) {
            let total = truth_at(period, day_index as i64, &mut rng);
            let solar = if (16..40).contains(&period.slot()) {
                total * 0.4
            } else {
                0.0
            };
            production.insert(
                period,
                ProductionRow {
                    period,
                    wind_mwh: total - solar,
                    solar_mwh: solar,
                    total_mwh: total,
                    available_capacity_mwh: None,
                },
            );
            actuals.insert(period, total);
        }
    }

    // teams
    let submissions_dir = dir.join("submissions");
    std::fs::create_dir_all(&submissions_dir).unwrap();
    let all_days = window.days();

    let write_team = |name: &str, series: &TeamSeries| {
        write_submissions(&submissions_dir.join(format!("{name}.csv")), series).unwrap();
    };

    let team_series = |skip_days: &[usize],
                           forecast_noise: f64,
                           strategic: bool,
                           rng: &mut ChaCha8Rng| {
        let mut series = TeamSeries::default();
        for (day_index, day) in all_days.iter().enumerate() {
            if skip_days.contains(&day_index) {
                continue;
            }
            for period in window.periods_of_day(*day) {
                let truth = actuals[&period];
                let center = truth + rng.gen_range(-forecast_noise..forecast_noise);
                let forecast =
                    QuantileForecast::new(period, quantiles_around(center, forecast_noise / 2.0 + 5.0))
                        .unwrap();
                let bid = if strategic {
                    // leans on the slot climatology of the spread
                    (forecast.median() - slot_spread(period.slot()) / 0.14).clamp(0.0, 1800.0)
                } else {
                    forecast.median()
                };
                series.insert(period, forecast, bid);
            }
        }
        series
    };

    let alpha = team_series(&[], 15.0, false, &mut rng);
    write_team("Alpha", &alpha);
    let beta = team_series(&[], 80.0, false, &mut rng);
    write_team("Beta", &beta);
    let gamma = team_series(&[], 25.0, true, &mut rng);
    write_team("Gamma", &gamma);
    let delta = team_series(&[7, 8], 60.0, false, &mut rng);
    write_team("Delta", &delta);
    let omega = team_series(&[0, 1, 2, 3, 4, 5, 6], 60.0, false, &mut rng);
    write_team("Omega", &omega);
    let noreport = team_series(&[], 70.0, false, &mut rng);
    write_team("NoReport", &noreport);
    // a perfect forecaster: every quantile equals the outcome, bid = outcome
    let mut exact = TeamSeries::default();
    for day in &all_days {
        for period in window.periods_of_day(*day) {
            let truth = actuals[&period];
            exact.insert(
                period,
                QuantileForecast::new(period, [truth; 9]).unwrap(),
                truth,
            );
        }
    }
    write_team("Exact", &exact);
    // benchmark: crude flat forecast, median bids, complete coverage
    let mut benchmark = TeamSeries::default();
    for day in &all_days {
        for period in window.periods_of_day(*day) {
            let forecast = QuantileForecast::new(period, quantiles_around(350.0, 60.0)).unwrap();
            let bid = forecast.median();
            benchmark.insert(period, forecast, bid);
        }
    }
    write_team("Benchmark", &benchmark);

    write_production(&dir.join("production.csv"), &production).unwrap();
    write_prices(&dir.join("prices.csv"), &prices).unwrap();
    std::fs::write(
        dir.join("run.ini"),
        format!(
            "[data]\ndata_dir = {}\n[window]\nstart = {}\nend = {}\n\
             [strategy]\nforecast_team = Alpha\n",
            dir.display(),
            WINDOW_START,
            WINDOW_END
        ),
    )
    .unwrap();
    std::fs::write(
        dir.join("teams.csv"),
        "team,file,report_submitted,student,organiser\n\
         Alpha,Alpha.csv,true,false,false\n\
         Beta,Beta.csv,true,true,false\n\
         Gamma,Gamma.csv,true,false,false\n\
         Delta,Delta.csv,true,false,false\n\
         Omega,Omega.csv,true,false,false\n\
         NoReport,NoReport.csv,false,false,false\n\
         Exact,Exact.csv,true,false,false\n\
         Benchmark,Benchmark.csv,true,false,true\n",
    )
    .unwrap();

    Fixture {
        data_dir: dir.to_path_buf(),
        window,
        actuals,
        prices,
    }
}

/// A config pointing at the fixture with a distinct output directory.
pub fn config_for(fixture: &Fixture, out_dir: &Path) -> RunConfig {
    RunConfig {
        data_dir: fixture.data_dir.clone(),
        out_dir: out_dir.to_path_buf(),
        window: fixture.window,
        strategy_forecast_team: "Alpha".into(),
        ..RunConfig::default()
    }
}
