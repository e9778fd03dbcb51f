//! The subcommand implementations behind the CLI: each loads the dataset,
//! runs its slice of the replay, and writes tidy tables into the output
//! directory. Returns the list of files written.

use crate::analytics::{self, SkillPoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::leaderboard::RankingRules;
use crate::output::{num, num2, opt, text, Table};
use crate::replay::{
    build_leaderboard, replay_teams, revenue_bounds, run_strategy_backtest, Dataset, TeamOutcome,
};
use crate::scoring::{expanding_pinball, reliability_diagram, LEVELS};
use crate::team::TeamSeries;
use crate::time::{DayWindow, Period};
use chrono::Duration;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn prepare(config: &RunConfig) -> Result<(Dataset, Vec<TeamOutcome>)> {
    config.validate()?;
    let dataset = Dataset::load(config)?;
    let outcomes = replay_teams(&dataset, config)?;
    Ok((dataset, outcomes))
}

fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(())
}

/// Forecasting products: per-team pinball with day/night split, reliability
/// diagrams, and the expanding score series.
pub fn cmd_score(config: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out_dir(config)?;
    let (dataset, outcomes) = prepare(config)?;
    let hash = config.hash();
    let mut written = Vec::new();

    let mut pinball = Table::new(
        "pinball",
        "scores in MWh",
        vec![
            "team",
            "periods",
            "overall_mwh",
            "daytime_mwh",
            "overnight_mwh",
            "missing_actuals",
            "missed_submissions",
        ],
    );
    for o in &outcomes {
        pinball.push(vec![
            text(&o.name),
            o.pinball.per_period.len().to_string(),
            num(o.pinball.overall),
            opt(o.pinball.daytime),
            opt(o.pinball.overnight),
            o.pinball.missing_actuals.len().to_string(),
            o.missed_submissions.to_string(),
        ]);
    }
    written.push(pinball.write(&config.out_dir, &hash)?);

    let mut reliability = Table::new(
        "reliability",
        "coverage as fraction of periods",
        vec!["team", "day_window", "level", "coverage"],
    );
    for record in &dataset.teams {
        let forecasts = record.series.forecasts();
        for window in [DayWindow::All, DayWindow::Daytime, DayWindow::Overnight] {
            let coverage = reliability_diagram(&forecasts, &dataset.actuals, window)?;
            for (i, &level) in LEVELS.iter().enumerate() {
                reliability.push(vec![
                    text(&record.name),
                    window.label().to_string(),
                    num(level),
                    num(coverage[i]),
                ]);
            }
        }
    }
    written.push(reliability.write(&config.out_dir, &hash)?);

    let mut expanding = Table::new(
        "expanding_pinball",
        "expanding mean score in MWh",
        vec!["team", "period", "expanding_mean_mwh"],
    );
    for o in &outcomes {
        for (period, score) in expanding_pinball(&o.pinball.per_period) {
            expanding.push(vec![text(&o.name), period.to_iso(), num(score)]);
        }
    }
    written.push(expanding.write(&config.out_dir, &hash)?);
    Ok(written)
}

/// Restrict a team's series to periods on/after a cutoff day.
fn series_from(series: &TeamSeries, cutoff: Period) -> TeamSeries {
    TeamSeries {
        entries: series
            .entries
            .iter()
            .filter(|(p, _)| **p >= cutoff)
            .map(|(p, e)| (*p, e.clone()))
            .collect(),
    }
}

/// Trading products: revenue totals and series, trade statistics, opportunity
/// cost, capture ratios, bid histograms, direction statistics, risk-reward
/// pairs, rolling relative revenue, bounds, and the skill-value fit.
pub fn cmd_trade(config: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out_dir(config)?;
    let (dataset, outcomes) = prepare(config)?;
    let hash = config.hash();
    let mut written = Vec::new();

    let mut revenue = Table::new(
        "revenue",
        "revenue in GBP",
        vec!["team", "periods", "total_revenue_gbp", "total_revenue_millions"],
    );
    let mut revenue_series_table = Table::new(
        "revenue_series",
        "revenue in GBP per settlement period",
        vec!["team", "period", "revenue_gbp"],
    );
    for o in &outcomes {
        revenue.push(vec![
            text(&o.name),
            o.revenue.per_period.len().to_string(),
            num(o.revenue.total),
            num2(o.revenue.total / 1e6),
        ]);
        for &(period, r) in &o.revenue.per_period {
            revenue_series_table.push(vec![text(&o.name), period.to_iso(), num(r)]);
        }
    }
    written.push(revenue.write(&config.out_dir, &hash)?);
    written.push(revenue_series_table.write(&config.out_dir, &hash)?);

    let mut stats_table = Table::new(
        "trade_stats",
        "win_rate as fraction; vwaps in GBP/MWh; var/es in GBP per period",
        vec![
            "team",
            "periods",
            "win_rate",
            "relative_bid_volume",
            "trade_vwap",
            "production_vwap",
            "sharpe",
            "sortino",
            "var5_gbp",
            "es5_gbp",
        ],
    );
    let mut risk_reward = Table::new(
        "risk_reward",
        "var in GBP; vwap in GBP/MWh; first competition days excluded",
        vec!["team", "var5_gbp", "production_vwap"],
    );
    let risk_cutoff_day = config.window.first_day + Duration::days(config.risk_exclude_days as i64);
    for record in &dataset.teams {
        let stats = analytics::trade_stats(
            &record.series,
            &dataset.prices,
            &dataset.actuals,
            config.k,
            config.var_level,
        )?;
        stats_table.push(vec![
            text(&record.name),
            stats.periods.to_string(),
            num(stats.win_rate),
            opt(stats.relative_bid_volume),
            opt(stats.trade_vwap),
            opt(stats.production_vwap),
            opt(stats.sharpe),
            opt(stats.sortino),
            num(stats.var5),
            opt(stats.es5),
        ]);

        if let Some(first) = config
            .window
            .periods_of_day(risk_cutoff_day)
            .first()
            .copied()
        {
            let late = series_from(&record.series, first);
            if !late.entries.is_empty() {
                let stats = analytics::trade_stats(
                    &late,
                    &dataset.prices,
                    &dataset.actuals,
                    config.k,
                    config.var_level,
                )?;
                risk_reward.push(vec![
                    text(&record.name),
                    num(stats.var5),
                    opt(stats.production_vwap),
                ]);
            }
        }
    }
    written.push(stats_table.write(&config.out_dir, &hash)?);
    written.push(risk_reward.write(&config.out_dir, &hash)?);

    let mut cost_table = Table::new(
        "opportunity_cost",
        "cost in GBP/MWh traded; pinball in MWh",
        vec!["team", "period", "pinball_mwh", "cost_gbp_per_mwh"],
    );
    let mut capture_table = Table::new(
        "capture_ratio",
        "median of revenue over maximum revenue, by slot of day",
        vec!["team", "slot", "median_capture_ratio"],
    );
    let mut hist_table = Table::new(
        "bid_histogram",
        "strategic bid volume (median forecast minus bid) in MWh",
        vec!["team", "bin_lo_mwh", "bin_hi_mwh", "count"],
    );
    let mut direction_table = Table::new(
        "direction_stats",
        "fractions of decidable periods",
        vec![
            "team",
            "correct_bid_direction",
            "imbalance_opposite_spread",
            "decidable_bids",
            "decidable_imbalances",
        ],
    );
    for record in &dataset.teams {
        for row in analytics::opportunity_cost(
            &record.series,
            &dataset.prices,
            &dataset.actuals,
            config.k,
            config.volume_epsilon,
        )? {
            cost_table.push(vec![
                text(&record.name),
                row.period.to_iso(),
                num(row.pinball),
                num(row.cost_per_mwh),
            ]);
        }
        for (slot, ratio) in
            analytics::capture_ratio(&record.series, &dataset.prices, &dataset.actuals, config.k)?
        {
            capture_table.push(vec![text(&record.name), slot.to_string(), num(ratio)]);
        }
        let hist = analytics::strategic_bid_histogram(
            &record.series,
            config.histogram_bin_width,
            config.histogram_lo,
            config.histogram_hi,
        )?;
        let edges = hist.bin_edges();
        for (i, count) in hist.counts.iter().enumerate() {
            if *count > 0 {
                hist_table.push(vec![
                    text(&record.name),
                    num(edges[i]),
                    num(edges[i + 1]),
                    count.to_string(),
                ]);
            }
        }
        let direction =
            analytics::direction_stats(&record.series, &dataset.prices, &dataset.actuals);
        direction_table.push(vec![
            text(&record.name),
            opt(direction.correct_bid_direction),
            opt(direction.imbalance_opposite_spread),
            direction.decidable_bids.to_string(),
            direction.decidable_imbalances.to_string(),
        ]);
    }
    written.push(cost_table.write(&config.out_dir, &hash)?);
    written.push(capture_table.write(&config.out_dir, &hash)?);
    written.push(hist_table.write(&config.out_dir, &hash)?);
    written.push(direction_table.write(&config.out_dir, &hash)?);

    // rolling revenue of the trading top 10 relative to their mean
    let rows = build_leaderboard(&outcomes, &RankingRules::default())?;
    let top10: Vec<String> = rows
        .iter()
        .filter(|r| r.trading_rank.is_some_and(|rank| rank <= 10))
        .map(|r| r.team.clone())
        .collect();
    let mut cumulative: BTreeMap<&str, BTreeMap<Period, f64>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| top10.contains(&o.name)) {
        let mut acc = 0.0;
        let series = cumulative.entry(o.name.as_str()).or_default();
        for &(period, r) in &o.revenue.per_period {
            acc += r;
            series.insert(period, acc);
        }
    }
    let mut rolling = Table::new(
        "rolling_revenue",
        "cumulative revenue minus the top-10 mean, GBP",
        vec!["team", "period", "relative_cumulative_revenue_gbp"],
    );
    for period in &dataset.mask.included {
        let values: Vec<(&str, f64)> = cumulative
            .iter()
            .filter_map(|(team, series)| series.get(period).map(|v| (*team, *v)))
            .collect();
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64;
        for (team, v) in values {
            rolling.push(vec![text(team), period.to_iso(), num(v - mean)]);
        }
    }
    written.push(rolling.write(&config.out_dir, &hash)?);

    let bounds = revenue_bounds(&dataset, config)?;
    let mut bounds_table = Table::new(
        "bounds",
        "revenue in GBP over the aligned window",
        vec!["bound", "revenue_gbp", "revenue_millions"],
    );
    bounds_table.push(vec![
        "perfect_forecast".into(),
        num(bounds.perfect_forecast),
        num2(bounds.perfect_forecast / 1e6),
    ]);
    bounds_table.push(vec![
        "perfect_decision".into(),
        num(bounds.perfect_decision),
        num2(bounds.perfect_decision / 1e6),
    ]);
    written.push(bounds_table.write(&config.out_dir, &hash)?);

    let points: Vec<SkillPoint> = outcomes
        .iter()
        .map(|o| SkillPoint {
            team: o.name.clone(),
            pinball: o.pinball.overall,
            revenue_millions: o.revenue.total / 1e6,
        })
        .collect();
    let mut skill_table = Table::new(
        "skill_value",
        "slope in GBP millions per MWh of pinball",
        vec![
            "slope",
            "intercept",
            "ci95_low",
            "ci95_high",
            "teams_used",
            "teams_excluded",
        ],
    );
    match analytics::skill_value_regression(
        &points,
        config.pinball_threshold,
        &config.outlier_exclusions,
    ) {
        Ok(fit) => skill_table.push(vec![
            num(fit.slope),
            num(fit.intercept),
            num(fit.ci95.0),
            num(fit.ci95.1),
            fit.n_used.to_string(),
            text(&fit.excluded.join(";")),
        ]),
        Err(Error::Fit(_)) => {} // too few teams: emit the empty table
        Err(e) => return Err(e),
    }
    written.push(skill_table.write(&config.out_dir, &hash)?);

    Ok(written)
}

/// The final three-track table.
pub fn cmd_leaderboard(config: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out_dir(config)?;
    let (_dataset, outcomes) = prepare(config)?;
    let rows = build_leaderboard(&outcomes, &RankingRules::default())?;
    let mut table = Table::new(
        "leaderboard",
        "pinball in MWh (2 dp); revenue in GBP millions (2 dp)",
        vec![
            "team",
            "pinball_mwh",
            "revenue_millions",
            "forecast_rank",
            "trading_rank",
            "combined_rank",
            "eligible",
            "report_submitted",
            "missed_submissions",
            "student",
        ],
    );
    let rank = |r: Option<u32>| r.map(|v| v.to_string()).unwrap_or_default();
    for row in &rows {
        table.push(vec![
            text(&row.team),
            num2(row.pinball),
            num2(row.revenue / 1e6),
            rank(row.forecast_rank),
            rank(row.trading_rank),
            rank(row.combined_rank),
            row.eligible.to_string(),
            row.report_submitted.to_string(),
            row.missed_submissions.to_string(),
            row.student.to_string(),
        ]);
    }
    Ok(vec![table.write(&config.out_dir, &config.hash())?])
}

/// Strategy comparison against the median baseline.
pub fn cmd_strategy_backtest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out_dir(config)?;
    config.validate()?;
    let dataset = Dataset::load(config)?;
    let outcomes = run_strategy_backtest(&dataset, config)?;
    let mut table = Table::new(
        "strategy_backtest",
        "revenue in GBP; win_rate as fraction",
        vec![
            "strategy",
            "periods",
            "total_revenue_gbp",
            "uplift_vs_median_gbp",
            "win_rate",
            "sharpe",
            "sortino",
            "var5_gbp",
            "es5_gbp",
            "fallback_periods",
        ],
    );
    for o in &outcomes {
        table.push(vec![
            o.kind.name().to_string(),
            o.stats.periods.to_string(),
            num(o.total_revenue),
            num(o.uplift_vs_median),
            num(o.stats.win_rate),
            opt(o.stats.sharpe),
            opt(o.stats.sortino),
            num(o.stats.var5),
            opt(o.stats.es5),
            o.fallback_periods.to_string(),
        ]);
    }
    Ok(vec![table.write(&config.out_dir, &config.hash())?])
}

/// Load everything, write the validation report and alignment mask, and fail
/// on hard errors.
pub fn cmd_validate_data(config: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out_dir(config)?;
    config.validate()?;
    let dataset = Dataset::load(config)?;
    let hash = config.hash();
    let mut written = Vec::new();

    let report_path = config.out_dir.join("validation_report.txt");
    let mut text_out = String::new();
    text_out.push_str(&format!("# config-hash: {hash}\n"));
    for report in &dataset.reports {
        text_out.push_str(&report.to_string());
    }
    text_out.push_str(&format!(
        "alignment: {} included, {} excluded\n",
        dataset.mask.included.len(),
        dataset.mask.excluded.len()
    ));
    std::fs::write(&report_path, text_out)?;
    written.push(report_path);

    let mut mask_table = Table::new(
        "alignment_mask",
        "per-period inclusion with exclusion reasons",
        vec!["period", "included", "missing_from"],
    );
    for period in &dataset.mask.included {
        mask_table.push(vec![period.to_iso(), "true".into(), String::new()]);
    }
    for exclusion in &dataset.mask.excluded {
        mask_table.push(vec![
            exclusion.period.to_iso(),
            "false".into(),
            text(&exclusion.missing_from.join(";")),
        ]);
    }
    written.push(mask_table.write(&config.out_dir, &hash)?);
    Ok(written)
}
