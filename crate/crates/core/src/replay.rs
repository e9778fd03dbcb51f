//! Full-competition replay: assemble the archive into aligned series, score
//! and settle every team, rank them, and backtest the bidding strategies.

use crate::analytics::{self, RevenueSeries, TradeStats};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    self, align, AlignmentMask, ProductionRow, SchemaMapping, ValidationReport,
};
use crate::leaderboard::{fill_missing, rank_teams, LeaderboardRow, RankingRules, ScoredTeam, TeamRecord};
use crate::market::{self, MarketPrices, TradePosition};
use crate::scoring::{score_series, PinballResult, QuantileForecast};
use crate::strategy::{
    self, bid_expected_optimal, bid_learned, bid_median, climatological_spread, BidRegressor,
    StrategyConfig, StrategyKind,
};
use crate::team::TeamSeries;
use crate::time::{submission_deadline, Period};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// One roster line from teams.csv.
#[derive(Debug, Clone)]
pub struct TeamMeta {
    pub name: String,
    pub file: String,
    pub report_submitted: bool,
    pub student: bool,
    pub organiser: bool,
}

fn parse_flag(raw: &str) -> bool {
    matches!(
        raw.trim().to_ascii_lowercase().as_str(),
        "true" | "1" | "yes"
    )
}

/// Read the team roster: `team` column required; `file`,
/// `report_submitted`, `student`, `organiser` optional.
pub fn load_team_roster(path: &Path) -> Result<Vec<TeamMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let team_col = col("team").ok_or_else(|| Error::Load {
        path: path.display().to_string(),
        row: 1,
        message: "teams file needs a 'team' column".into(),
    })?;
    let file_col = col("file");
    let report_col = col("report_submitted");
    let student_col = col("student");
    let organiser_col = col("organiser");

    let mut roster = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: i + 2,
            message: e.to_string(),
        })?;
        let get = |idx: Option<usize>| idx.and_then(|j| record.get(j)).unwrap_or("");
        let name = record.get(team_col).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(Error::Load {
                path: path.display().to_string(),
                row: i + 2,
                message: "empty team name".into(),
            });
        }
        if !seen.insert(name.clone()) {
            return Err(Error::Load {
                path: path.display().to_string(),
                row: i + 2,
                message: format!("duplicate team '{name}'"),
            });
        }
        let file = match get(file_col) {
            "" => format!("{name}.csv"),
            f => f.to_string(),
        };
        roster.push(TeamMeta {
            name,
            file,
            report_submitted: parse_flag(get(report_col)),
            student: parse_flag(get(student_col)),
            organiser: parse_flag(get(organiser_col)),
        });
    }
    Ok(roster)
}

/// The loaded, window-aligned archive.
#[derive(Debug)]
pub struct Dataset {
    /// Realised production inside the window.
    pub production: BTreeMap<Period, ProductionRow>,
    /// Total MWh inside the window (the scoring target).
    pub actuals: BTreeMap<Period, f64>,
    /// Full price history including pre-window periods (strategies need it).
    pub price_history: BTreeMap<Period, MarketPrices>,
    /// Prices inside the window (settlement).
    pub prices: BTreeMap<Period, MarketPrices>,
    /// Teams with benchmark-filled series, in roster order.
    pub teams: Vec<TeamRecord>,
    pub mask: AlignmentMask,
    pub reports: Vec<ValidationReport>,
}

impl Dataset {
    /// Load everything named by the config, restrict to the window, fill
    /// missed days from the benchmark, and align.
    pub fn load(config: &RunConfig) -> Result<Dataset> {
        let mapping_for = |name: &Option<String>| -> Result<SchemaMapping> {
            match name {
                Some(file) => SchemaMapping::from_file(&config.data_path(file)),
                None => Ok(SchemaMapping::default()),
            }
        };
        let mut reports = Vec::new();

        let (production_all, report) = ingest::load_production(
            &config.data_path(&config.production_file),
            &mapping_for(&config.production_mapping)?,
        )?;
        reports.push(report);
        let (prices_all, report) = ingest::load_prices(
            &config.data_path(&config.prices_file),
            &mapping_for(&config.prices_mapping)?,
        )?;
        reports.push(report);

        let window = &config.window;
        let production: BTreeMap<Period, ProductionRow> = production_all
            .into_iter()
            .filter(|(p, _)| window.contains(*p))
            .collect();
        let actuals: BTreeMap<Period, f64> =
            production.iter().map(|(p, r)| (*p, r.total_mwh)).collect();
        let prices: BTreeMap<Period, MarketPrices> = prices_all
            .iter()
            .filter(|(p, _)| window.contains(**p))
            .map(|(p, v)| (*p, *v))
            .collect();

        let roster = load_team_roster(&config.data_path(&config.teams_file))?;
        let keep = |name: &str| {
            config.team_filter.is_empty()
                || config.team_filter.iter().any(|t| t == name)
                || name == config.benchmark_team
        };
        let submissions_mapping = mapping_for(&config.submissions_mapping)?;
        let mut series_by_team: BTreeMap<String, TeamSeries> = BTreeMap::new();
        for meta in roster.iter().filter(|m| keep(&m.name)) {
            let path = config
                .data_path(&config.submissions_dir)
                .join(&meta.file);
            let (series, report) =
                ingest::load_submissions(&path, &submissions_mapping, config.bid_cap)?;
            // only window periods are scored
            let restricted = TeamSeries {
                entries: series
                    .entries
                    .into_iter()
                    .filter(|(p, _)| window.contains(*p))
                    .collect(),
            };
            reports.push(report);
            series_by_team.insert(meta.name.clone(), restricted);
        }

        let benchmark_series = series_by_team
            .get(&config.benchmark_team)
            .ok_or_else(|| {
                Error::Data(format!(
                    "benchmark team '{}' not found in roster/submissions",
                    config.benchmark_team
                ))
            })?
            .clone();

        let mut teams = Vec::new();
        for meta in roster.iter().filter(|m| keep(&m.name)) {
            let raw = &series_by_team[&meta.name];
            let (filled, missed) = fill_missing(raw, &benchmark_series, window)?;
            teams.push(TeamRecord {
                name: meta.name.clone(),
                series: filled,
                missed_submissions: missed,
                report_submitted: meta.report_submitted,
                student: meta.student,
                organiser: meta.organiser,
            });
        }

        let mask = align(&[
            ("prices", prices.keys().copied().collect()),
            ("actuals", actuals.keys().copied().collect()),
        ])?;

        Ok(Dataset {
            production,
            actuals,
            price_history: prices_all,
            prices,
            teams,
            mask,
            reports,
        })
    }
}

/// Scores and settlement for one team.
#[derive(Debug)]
pub struct TeamOutcome {
    pub name: String,
    pub missed_submissions: usize,
    pub report_submitted: bool,
    pub student: bool,
    pub organiser: bool,
    pub pinball: PinballResult,
    pub revenue: RevenueSeries,
}

/// Score and settle every loaded team.
pub fn replay_teams(dataset: &Dataset, config: &RunConfig) -> Result<Vec<TeamOutcome>> {
    let mut outcomes = Vec::new();
    for record in &dataset.teams {
        let forecasts = scoring_forecasts(record, config);
        let pinball = score_series(&forecasts, &dataset.actuals, Some(&config.window))?;
        let revenue = analytics::revenue_series(
            &record.series,
            &dataset.prices,
            &dataset.actuals,
            config.k,
        )?;
        outcomes.push(TeamOutcome {
            name: record.name.clone(),
            missed_submissions: record.missed_submissions,
            report_submitted: record.report_submitted,
            student: record.student,
            organiser: record.organiser,
            pinball,
            revenue,
        });
    }
    Ok(outcomes)
}

/// Forecast list entering the pinball score; the sanitize switch drops the
/// flagged team's corrupted period from scoring only (bids still settle).
fn scoring_forecasts(record: &TeamRecord, config: &RunConfig) -> Vec<QuantileForecast> {
    record
        .series
        .entries
        .iter()
        .filter(|(period, _)| {
            !(config.sanitize_probprofit
                && record.name == config.probprofit_team
                && **period == config.probprofit_period)
        })
        .map(|(_, e)| e.forecast.clone())
        .collect()
}

/// Build the final table from per-team outcomes.
pub fn build_leaderboard(outcomes: &[TeamOutcome], rules: &RankingRules) -> Result<Vec<LeaderboardRow>> {
    let scored: Vec<ScoredTeam> = outcomes
        .iter()
        .map(|o| ScoredTeam {
            name: o.name.clone(),
            pinball: o.pinball.overall,
            revenue: o.revenue.total,
            missed_submissions: o.missed_submissions,
            report_submitted: o.report_submitted,
            student: o.student,
            organiser: o.organiser,
        })
        .collect();
    rank_teams(&scored, rules)
}

/// Revenue of a perfect deterministic forecaster (bid the realised production
/// every period, clipped to the bid bounds) and of perfect decisions (the
/// revenue-maximising bid every period).
#[derive(Debug, Clone, Copy)]
pub struct RevenueBounds {
    pub perfect_forecast: f64,
    pub perfect_decision: f64,
}

pub fn revenue_bounds(dataset: &Dataset, config: &RunConfig) -> Result<RevenueBounds> {
    let mut perfect_forecast = 0.0;
    let mut perfect_decision = 0.0;
    for period in &dataset.mask.included {
        let price = &dataset.prices[period];
        let production = dataset.actuals[period];
        let bid = production.clamp(config.bid_floor, config.bid_cap);
        perfect_forecast += market::settle_revenue(
            price,
            &TradePosition {
                period: *period,
                bid,
                production,
            },
            config.k,
        )?;
        perfect_decision += market::max_revenue(production, price, config.k)?;
    }
    Ok(RevenueBounds {
        perfect_forecast,
        perfect_decision,
    })
}

/// One strategy's backtest: bids, settlement, and summary statistics.
#[derive(Debug)]
pub struct StrategyOutcome {
    pub kind: StrategyKind,
    pub bids: BTreeMap<Period, f64>,
    pub total_revenue: f64,
    pub stats: TradeStats,
    /// Periods where missing history forced a median-bid fallback.
    pub fallback_periods: usize,
    pub uplift_vs_median: f64,
}

/// Compute one strategy's bids for every delivery day of the window, falling
/// back to the median bid (and counting it) when climatology or training data
/// is not yet available.
pub fn strategy_bids(
    dataset: &Dataset,
    config: &RunConfig,
    kind: StrategyKind,
    forecasts: &BTreeMap<Period, QuantileForecast>,
) -> Result<(BTreeMap<Period, f64>, usize)> {
    let strategy_config = StrategyConfig {
        kind,
        k: config.k,
        bid_floor: config.bid_floor,
        bid_cap: config.bid_cap,
        climatology_window_days: config.climatology_window_days,
    };
    strategy_config.validate()?;
    let mut bids = BTreeMap::new();
    let mut fallbacks = 0usize;

    for day in config.window.days() {
        let deadline = submission_deadline(day);
        let visible_prices = strategy::prices_available_at(&dataset.price_history, deadline);
        let price_map: BTreeMap<Period, MarketPrices> =
            visible_prices.iter().map(|p| (p.period, *p)).collect();

        let mut regressor = BidRegressor::new();
        let mut regressor_ready = false;
        if kind == StrategyKind::Learned {
            let visible_actuals = strategy::actuals_available_at(&dataset.actuals, deadline);
            let table = strategy::build_optimal_bid_dataset(
                forecasts,
                &price_map,
                &visible_actuals,
                config.k,
                config.climatology_window_days,
                config.window.convention,
                Some(deadline),
            )?;
            regressor_ready = regressor.fit(&table.rows).is_ok();
        }

        for period in config.window.periods_of_day(day) {
            let Some(forecast) = forecasts.get(&period) else {
                continue;
            };
            let median = bid_median(forecast, &strategy_config);
            let bid = match kind {
                StrategyKind::Median => median,
                StrategyKind::ExpectedOptimal => {
                    match climatological_spread(
                        &visible_prices,
                        period,
                        config.climatology_window_days,
                    ) {
                        Ok(spread) => bid_expected_optimal(forecast, &spread, &strategy_config),
                        Err(Error::InsufficientData(_)) => {
                            fallbacks += 1;
                            median
                        }
                        Err(e) => return Err(e),
                    }
                }
                StrategyKind::Learned => {
                    let spread = climatological_spread(
                        &visible_prices,
                        period,
                        config.climatology_window_days,
                    );
                    match (regressor_ready, spread) {
                        (true, Ok(spread)) => bid_learned(
                            &regressor,
                            forecast,
                            spread.mean_spread,
                            &strategy_config,
                        )?,
                        (_, Err(Error::InsufficientData(_))) | (false, Ok(_)) => {
                            fallbacks += 1;
                            median
                        }
                        (_, Err(e)) => return Err(e),
                    }
                }
            };
            bids.insert(period, bid);
        }
    }
    Ok((bids, fallbacks))
}

/// Run every configured strategy against the same forecast series and report
/// totals, stats, and uplift versus the median baseline.
pub fn run_strategy_backtest(dataset: &Dataset, config: &RunConfig) -> Result<Vec<StrategyOutcome>> {
    let source = dataset
        .teams
        .iter()
        .find(|t| t.name == config.strategy_forecast_team)
        .ok_or_else(|| {
            Error::Config(format!(
                "strategy forecast team '{}' not loaded",
                config.strategy_forecast_team
            ))
        })?;
    let forecasts: BTreeMap<Period, QuantileForecast> = source
        .series
        .entries
        .iter()
        .map(|(p, e)| (*p, e.forecast.clone()))
        .collect();

    let mut kinds = config.strategies.clone();
    if !kinds.contains(&StrategyKind::Median) {
        kinds.insert(0, StrategyKind::Median); // baseline is always needed
    }

    let mut outcomes = Vec::new();
    let mut median_total = None;
    for kind in kinds {
        let (bids, fallback_periods) = strategy_bids(dataset, config, kind, &forecasts)?;
        let mut series = TeamSeries::default();
        for (period, bid) in &bids {
            series.insert(*period, forecasts[period].clone(), *bid);
        }
        let revenue =
            analytics::revenue_series(&series, &dataset.prices, &dataset.actuals, config.k)?;
        let stats = analytics::trade_stats(
            &series,
            &dataset.prices,
            &dataset.actuals,
            config.k,
            config.var_level,
        )?;
        if kind == StrategyKind::Median {
            median_total = Some(revenue.total);
        }
        outcomes.push(StrategyOutcome {
            kind,
            bids,
            total_revenue: revenue.total,
            stats,
            fallback_periods,
            uplift_vs_median: 0.0,
        });
    }
    let baseline = median_total.expect("median baseline always runs");
    for outcome in &mut outcomes {
        outcome.uplift_vs_median = outcome.total_revenue - baseline;
    }
    Ok(outcomes)
}
