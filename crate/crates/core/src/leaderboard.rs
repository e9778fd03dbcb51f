//! Leaderboard reconstruction: benchmark filling, eligibility, and the
//! three-track ranking.

use crate::error::{Error, Result};
use crate::team::TeamSeries;
use crate::time::Window;
use std::collections::BTreeSet;

/// A team's metadata and (possibly filled) submission series.
#[derive(Debug, Clone)]
pub struct TeamRecord {
    pub name: String,
    pub series: TeamSeries,
    /// Market days in the window without any submission from the team.
    pub missed_submissions: usize,
    pub report_submitted: bool,
    pub student: bool,
    /// Organiser-managed reference teams are listed but never ranked.
    pub organiser: bool,
}

/// Eligibility thresholds for a final rank.
#[derive(Debug, Clone)]
pub struct RankingRules {
    pub max_missed_submissions: usize,
    pub require_report: bool,
}

impl Default for RankingRules {
    fn default() -> Self {
        RankingRules {
            max_missed_submissions: 5,
            require_report: true,
        }
    }
}

impl RankingRules {
    pub fn eligible(&self, record: &TeamRecord) -> bool {
        !record.organiser
            && (!self.require_report || record.report_submitted)
            && record.missed_submissions <= self.max_missed_submissions
    }
}

/// Fill market days missing from a team's series with the benchmark's
/// forecasts and bids for those days. Filled periods are flagged. Returns the
/// filled series and the number of days that were filled.
pub fn fill_missing(
    series: &TeamSeries,
    benchmark: &TeamSeries,
    window: &Window,
) -> Result<(TeamSeries, usize)> {
    let submitted_days: BTreeSet<_> = series
        .periods()
        .map(|p| p.market_day(window.convention))
        .collect();
    let mut filled = series.clone();
    let mut filled_days = 0usize;
    for day in window.days() {
        if submitted_days.contains(&day) {
            continue;
        }
        filled_days += 1;
        let day_periods = window.periods_of_day(day);
        let mut found = 0usize;
        for period in &day_periods {
            if let Some(entry) = benchmark.entries.get(period) {
                let mut entry = entry.clone();
                entry.filled = true;
                filled.entries.insert(*period, entry);
                found += 1;
            }
        }
        if found == 0 {
            return Err(Error::Data(format!(
                "benchmark has no submission for needed day {day}"
            )));
        }
    }
    Ok((filled, filled_days))
}

/// A team's final scores entering the ranking.
#[derive(Debug, Clone)]
pub struct ScoredTeam {
    pub name: String,
    pub pinball: f64,
    pub revenue: f64,
    pub missed_submissions: usize,
    pub report_submitted: bool,
    pub student: bool,
    pub organiser: bool,
}

/// One output row: scores, the three ranks (None when ineligible), and flags.
#[derive(Debug, Clone)]
pub struct LeaderboardRow {
    pub team: String,
    pub pinball: f64,
    pub revenue: f64,
    pub forecast_rank: Option<u32>,
    pub trading_rank: Option<u32>,
    pub combined_rank: Option<u32>,
    pub eligible: bool,
    pub missed_submissions: usize,
    pub report_submitted: bool,
    pub student: bool,
    /// Set when an exact score tie was broken by team name.
    pub tied: bool,
}

/// Rank scored teams: forecast rank by ascending pinball, trading rank by
/// descending revenue, combined by ascending rank sum with ties broken on the
/// forecasting track. Ineligible teams keep their scores but get no ranks.
/// Rows come back ordered by ascending pinball.
pub fn rank_teams(teams: &[ScoredTeam], rules: &RankingRules) -> Result<Vec<LeaderboardRow>> {
    let mut names = BTreeSet::new();
    for t in teams {
        if !names.insert(&t.name) {
            return Err(Error::InvalidInput(format!("duplicate team '{}'", t.name)));
        }
    }

    let records: Vec<TeamRecord> = teams
        .iter()
        .map(|t| TeamRecord {
            name: t.name.clone(),
            series: TeamSeries::default(),
            missed_submissions: t.missed_submissions,
            report_submitted: t.report_submitted,
            student: t.student,
            organiser: t.organiser,
        })
        .collect();
    let eligible_idx: Vec<usize> = (0..teams.len())
        .filter(|&i| rules.eligible(&records[i]))
        .collect();

    // Exact ties fall back to name order and are flagged on both rows.
    let mut tied = vec![false; teams.len()];
    let rank_by = |key: &dyn Fn(usize) -> f64, tied: &mut Vec<bool>| -> Vec<(usize, u32)> {
        let mut order = eligible_idx.clone();
        order.sort_by(|&a, &b| {
            key(a)
                .partial_cmp(&key(b))
                .expect("finite scores")
                .then_with(|| teams[a].name.cmp(&teams[b].name))
        });
        for pair in order.windows(2) {
            if key(pair[0]) == key(pair[1]) {
                tied[pair[0]] = true;
                tied[pair[1]] = true;
            }
        }
        order
            .iter()
            .enumerate()
            .map(|(rank, &i)| (i, rank as u32 + 1))
            .collect()
    };

    let forecast_pairs = rank_by(&|i| teams[i].pinball, &mut tied);
    let trading_pairs = rank_by(&|i| -teams[i].revenue, &mut tied);

    let mut forecast_rank = vec![None; teams.len()];
    for (i, r) in forecast_pairs {
        forecast_rank[i] = Some(r);
    }
    let mut trading_rank = vec![None; teams.len()];
    for (i, r) in trading_pairs {
        trading_rank[i] = Some(r);
    }

    // Combined: ascending rank sum, ties broken by forecasting rank (which is
    // itself unique, so the order is total).
    let mut combined_order = eligible_idx.clone();
    combined_order.sort_by_key(|&i| {
        (
            forecast_rank[i].unwrap() + trading_rank[i].unwrap(),
            forecast_rank[i].unwrap(),
        )
    });
    let mut combined_rank = vec![None; teams.len()];
    for (rank, &i) in combined_order.iter().enumerate() {
        combined_rank[i] = Some(rank as u32 + 1);
    }

    let mut rows: Vec<LeaderboardRow> = teams
        .iter()
        .enumerate()
        .map(|(i, t)| LeaderboardRow {
            team: t.name.clone(),
            pinball: t.pinball,
            revenue: t.revenue,
            forecast_rank: forecast_rank[i],
            trading_rank: trading_rank[i],
            combined_rank: combined_rank[i],
            eligible: forecast_rank[i].is_some(),
            missed_submissions: t.missed_submissions,
            report_submitted: t.report_submitted,
            student: t.student,
            tied: tied[i],
        })
        .collect();
    rows.sort_by(|a, b| {
        a.pinball
            .partial_cmp(&b.pinball)
            .expect("finite")
            .then_with(|| a.team.cmp(&b.team))
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::QuantileForecast;
    use crate::time::{DayConvention, Window};
    use chrono::NaiveDate;

    fn team(name: &str, pinball: f64, revenue_m: f64, missed: usize, report: bool) -> ScoredTeam {
        ScoredTeam {
            name: name.into(),
            pinball,
            revenue: revenue_m * 1e6,
            missed_submissions: missed,
            report_submitted: report,
            student: false,
            organiser: false,
        }
    }

    fn organiser(name: &str, pinball: f64, revenue_m: f64) -> ScoredTeam {
        ScoredTeam {
            organiser: true,
            ..team(name, pinball, revenue_m, 0, true)
        }
    }

    /// The published 2024 final standings: scores in, three rank columns out.
    #[test]
    fn ranking_reproduces_final_standings() {
        let teams = vec![
            team("SVK", 22.18, 88.88, 0, true),
            team("UI BUD", 23.18, 88.07, 0, true),
            team("Rnt", 24.64, 88.29, 1, true),
            team("GEB", 25.16, 88.18, 0, true),
            team("BridgeForCast", 25.34, 87.67, 1, true),
            organiser("quantopia", 25.38, 87.96),
            team("LSEG Power Team", 25.74, 85.71, 0, true),
            team("sukantabasu", 27.04, 87.83, 1, true),
            team("Stochastic Parrots", 27.50, 87.53, 1, true),
            team("EnergiWise", 27.65, 87.43, 0, true),
            team("NICE_Forecast", 27.98, 87.21, 0, true),
            team("Oracle", 28.34, 87.20, 0, true),
            team("Ihubex", 29.22, 87.64, 2, true),
            team("RE-Cast", 30.04, 87.31, 0, true),
            team("(Please hug emoji)", 31.01, 84.29, 1, true),
            team("PI9", 31.12, 85.89, 2, false),
            team("GM Team Mannheim", 33.92, 85.55, 0, true),
            team("Zzblu", 35.04, 84.41, 3, true),
            team("Eguzkinet", 36.68, 83.83, 5, true),
            team("tradRES", 37.19, 84.45, 4, true),
            team("NAECO Blue GmbH", 38.90, 85.97, 6, true),
            team("justForFun", 39.50, 85.18, 6, true),
            team("KittenKilowatt", 41.67, 83.71, 0, true),
            team("OLPZR", 44.84, 85.58, 0, true),
            team("6340", 47.37, 84.09, 5, true),
            team("CRL", 47.73, 84.23, 40, true),
            organiser("Benchmark", 53.58, 82.23),
            team("FCOR_BL", 51.66, 82.26, 2, true),
            team("power_rabbit", 53.96, 84.03, 4, true),
            team("Enerweb", 55.13, 83.22, 4, true),
            team("mizu", 58.54, 81.68, 0, false),
            team("ProbProfit", 2645715638.85, 87.52, 0, false),
        ];
        let rows = rank_teams(&teams, &RankingRules::default()).unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.team == n).unwrap();

        let expect = [
            ("SVK", 1, 1, 1),
            ("UI BUD", 2, 4, 3),
            ("Rnt", 3, 2, 2),
            ("GEB", 4, 3, 4),
            ("BridgeForCast", 5, 6, 5),
            ("LSEG Power Team", 6, 13, 9),
            ("sukantabasu", 7, 5, 6),
            ("Stochastic Parrots", 8, 8, 7),
            ("EnergiWise", 9, 9, 8),
            ("NICE_Forecast", 10, 11, 11),
            ("Oracle", 11, 12, 12),
            ("Ihubex", 12, 7, 10),
            ("RE-Cast", 13, 10, 13),
            ("(Please hug emoji)", 14, 18, 15),
            ("GM Team Mannheim", 15, 15, 14),
            ("Zzblu", 16, 17, 16),
            ("Eguzkinet", 17, 21, 19),
            ("tradRES", 18, 16, 17),
            ("KittenKilowatt", 19, 22, 21),
            ("OLPZR", 20, 14, 18),
            ("6340", 21, 19, 20),
            ("FCOR_BL", 22, 24, 23),
            ("power_rabbit", 23, 20, 22),
            ("Enerweb", 24, 23, 24),
        ];
        for (name, f, t, c) in expect {
            let row = by_name(name);
            assert_eq!(row.forecast_rank, Some(f), "{name} forecast rank");
            assert_eq!(row.trading_rank, Some(t), "{name} trading rank");
            assert_eq!(row.combined_rank, Some(c), "{name} combined rank");
        }
        for name in [
            "quantopia",
            "Benchmark",
            "PI9",
            "NAECO Blue GmbH",
            "justForFun",
            "CRL",
            "mizu",
            "ProbProfit",
        ] {
            let row = by_name(name);
            assert!(!row.eligible, "{name} must be unranked");
            assert_eq!(row.forecast_rank, None);
        }
        // eligible ranks are a permutation of 1..=24 in every track
        for extract in [
            |r: &LeaderboardRow| r.forecast_rank,
            |r: &LeaderboardRow| r.trading_rank,
            |r: &LeaderboardRow| r.combined_rank,
        ] {
            let mut ranks: Vec<u32> = rows.iter().filter_map(extract).collect();
            ranks.sort_unstable();
            assert_eq!(ranks, (1..=24).collect::<Vec<u32>>());
        }
        // output ordering is ascending pinball
        for pair in rows.windows(2) {
            assert!(pair[0].pinball <= pair[1].pinball);
        }
    }

    #[test]
    fn combined_tie_broken_by_forecast_rank() {
        // two teams with equal rank sums; the better forecaster wins
        let teams = vec![
            team("a", 10.0, 90.0, 0, true), // F1 T1 sum 2
            team("b", 11.0, 80.0, 0, true), // F2 T4 sum 6
            team("c", 12.0, 85.0, 0, true), // F3 T3 sum 6
            team("d", 13.0, 86.0, 0, true), // F4 T2 sum 6
        ];
        let rows = rank_teams(&teams, &RankingRules::default()).unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.team == n).unwrap();
        assert_eq!(by_name("a").combined_rank, Some(1));
        assert_eq!(by_name("b").combined_rank, Some(2));
        assert_eq!(by_name("c").combined_rank, Some(3));
        assert_eq!(by_name("d").combined_rank, Some(4));
    }

    #[test]
    fn single_eligible_team_ranks_first_everywhere() {
        let teams = vec![team("only", 30.0, 50.0, 0, true)];
        let rows = rank_teams(&teams, &RankingRules::default()).unwrap();
        assert_eq!(rows[0].forecast_rank, Some(1));
        assert_eq!(rows[0].trading_rank, Some(1));
        assert_eq!(rows[0].combined_rank, Some(1));
    }

    #[test]
    fn six_missed_days_is_ineligible() {
        let teams = vec![
            team("fine", 30.0, 50.0, 5, true),
            team("late", 25.0, 60.0, 6, true),
        ];
        let rows = rank_teams(&teams, &RankingRules::default()).unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.team == n).unwrap();
        assert!(by_name("fine").eligible);
        assert!(!by_name("late").eligible);
    }

    #[test]
    fn exact_ties_are_flagged_and_name_ordered() {
        let teams = vec![
            team("beta", 20.0, 80.0, 0, true),
            team("alfa", 20.0, 80.0, 0, true),
        ];
        let rows = rank_teams(&teams, &RankingRules::default()).unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.team == n).unwrap();
        assert_eq!(by_name("alfa").forecast_rank, Some(1));
        assert_eq!(by_name("beta").forecast_rank, Some(2));
        assert!(by_name("alfa").tied && by_name("beta").tied);
    }

    #[test]
    fn ranking_invariant_under_monotone_rescaling() {
        let teams = vec![
            team("a", 22.0, 88.0, 0, true),
            team("b", 25.0, 89.0, 0, true),
            team("c", 28.0, 84.0, 0, true),
            team("d", 31.5, 86.0, 0, true),
        ];
        let rescaled: Vec<ScoredTeam> = teams
            .iter()
            .map(|t| ScoredTeam {
                pinball: t.pinball.powi(3) * 0.01 + 5.0,
                revenue: (t.revenue / 1e6).exp2(),
                ..t.clone()
            })
            .collect();
        let a = rank_teams(&teams, &RankingRules::default()).unwrap();
        let b = rank_teams(&rescaled, &RankingRules::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.team, y.team);
            assert_eq!(x.forecast_rank, y.forecast_rank);
            assert_eq!(x.trading_rank, y.trading_rank);
            assert_eq!(x.combined_rank, y.combined_rank);
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let teams = vec![
            team("same", 20.0, 80.0, 0, true),
            team("same", 21.0, 81.0, 0, true),
        ];
        assert!(rank_teams(&teams, &RankingRules::default()).is_err());
    }

    fn build_series(window: &Window, days: &[NaiveDate], bid: f64) -> TeamSeries {
        let mut series = TeamSeries::default();
        for day in days {
            for period in window.periods_of_day(*day) {
                series.insert(
                    period,
                    QuantileForecast::new(period, [bid; 9]).unwrap(),
                    bid,
                );
            }
        }
        series
    }

    #[test]
    fn fill_missing_copies_benchmark_days() {
        let window = Window::new(
            NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
            NaiveDate::from_ymd_opt(2024, 3, 3).unwrap(),
            DayConvention::Utc,
        )
        .unwrap();
        let all_days = window.days();
        let benchmark = build_series(&window, &all_days, 10.0);

        // complete team is untouched
        let complete = build_series(&window, &all_days, 99.0);
        let (filled, missed) = fill_missing(&complete, &benchmark, &window).unwrap();
        assert_eq!(missed, 0);
        assert_eq!(filled.filled_period_count(), 0);

        // one missing day gets 48 flagged periods from the benchmark
        let partial = build_series(&window, &all_days[..2], 99.0);
        let (filled, missed) = fill_missing(&partial, &benchmark, &window).unwrap();
        assert_eq!(missed, 1);
        assert_eq!(filled.filled_period_count(), 48);
        let day3 = window.periods_of_day(all_days[2]);
        assert_eq!(filled.entries[&day3[0]].bid, 10.0);

        // a fully absent team becomes the benchmark
        let absent = TeamSeries::default();
        let (filled, missed) = fill_missing(&absent, &benchmark, &window).unwrap();
        assert_eq!(missed, 3);
        assert_eq!(filled.entries.len(), benchmark.entries.len());
        assert!(filled.entries.values().all(|e| e.filled));

        // other teams' series are untouched by the fill (value semantics)
        assert_eq!(complete.entries[&day3[0]].bid, 99.0);
    }

    #[test]
    fn fill_missing_gb_transition_day_fills_46_periods() {
        let window = Window::new(
            NaiveDate::from_ymd_opt(2024, 3, 31).unwrap(),
            NaiveDate::from_ymd_opt(2024, 3, 31).unwrap(),
            DayConvention::GbLocal,
        )
        .unwrap();
        let benchmark = build_series(&window, &window.days(), 10.0);
        let (filled, missed) = fill_missing(&TeamSeries::default(), &benchmark, &window).unwrap();
        assert_eq!(missed, 1);
        assert_eq!(filled.filled_period_count(), 46);
    }

    #[test]
    fn fill_missing_needs_benchmark_coverage() {
        let window = Window::new(
            NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
            NaiveDate::from_ymd_opt(2024, 3, 2).unwrap(),
            DayConvention::Utc,
        )
        .unwrap();
        let benchmark = build_series(&window, &window.days()[..1], 10.0);
        let err = fill_missing(&TeamSeries::default(), &benchmark, &window);
        assert!(matches!(err, Err(Error::Data(_))));
    }
}
