//! Loading and validating archived competition data into aligned half-hourly
//! series.
//!
//! Archive files are heterogeneous delimited text; a [`SchemaMapping`] names
//! the source columns, timestamp format and zone, and per-column unit scale
//! factors. Unit autodetection is deliberately not attempted. The canonical
//! on-disk form is UTF-8 CSV with ISO-8601 UTC timestamps and a mandatory
//! header row.

use crate::error::{Error, Result};
use crate::ini;
use crate::market::MarketPrices;
use crate::scoring::QuantileForecast;
use crate::team::TeamSeries;
use crate::time::Period;
use chrono::{LocalResult, NaiveDateTime, TimeZone, Utc};
use chrono_tz::Europe::London;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// Which canonical schema a file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Production,
    Prices,
    Submissions,
    Capacity,
}

impl SeriesKind {
    pub fn label(&self) -> &'static str {
        match self {
            SeriesKind::Production => "production",
            SeriesKind::Prices => "prices",
            SeriesKind::Submissions => "submissions",
            SeriesKind::Capacity => "capacity",
        }
    }

    fn required_columns(&self) -> &'static [&'static str] {
        match self {
            SeriesKind::Production => &["period_start_utc", "wind_mwh", "solar_mwh"],
            SeriesKind::Prices => &["period_start_utc", "da_price", "ss_price"],
            SeriesKind::Submissions => &[
                "period_start_utc",
                "q10",
                "q20",
                "q30",
                "q40",
                "q50",
                "q60",
                "q70",
                "q80",
                "q90",
                "bid",
            ],
            SeriesKind::Capacity => &["period_start_utc", "available_capacity_mwh"],
        }
    }
}

/// Timezone the source file's timestamps are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceTimezone {
    #[default]
    Utc,
    GbLocal,
}

/// How to read one archive file into the canonical schema.
#[derive(Debug, Clone, Default)]
pub struct SchemaMapping {
    /// canonical column name -> source column name (identity when absent)
    pub columns: BTreeMap<String, String>,
    /// strftime format; RFC 3339 when absent
    pub timestamp_format: Option<String>,
    pub timezone: SourceTimezone,
    /// canonical column name -> multiplicative unit scale
    pub scales: BTreeMap<String, f64>,
}

impl SchemaMapping {
    /// Parse a mapping file with `[columns]`, `[time]`, and `[units]` sections.
    pub fn from_text(text: &str) -> Result<Self> {
        let sections = ini::parse(text)?;
        let mut mapping = SchemaMapping::default();
        if let Some(cols) = sections.get("columns") {
            mapping.columns = cols.clone();
        }
        if let Some(time) = sections.get("time") {
            if let Some(fmt) = time.get("format") {
                mapping.timestamp_format = Some(fmt.clone());
            }
            match time.get("timezone").map(String::as_str) {
                None | Some("UTC") | Some("utc") => {}
                Some("Europe/London") => mapping.timezone = SourceTimezone::GbLocal,
                Some(other) => {
                    return Err(Error::Config(format!("unsupported timezone '{other}'")))
                }
            }
        }
        if let Some(units) = sections.get("units") {
            for (k, v) in units {
                let scale: f64 = v
                    .parse()
                    .map_err(|e| Error::Config(format!("unit scale for {k}: {e}")))?;
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::Config(format!("unit scale for {k} must be > 0")));
                }
                mapping.scales.insert(k.clone(), scale);
            }
        }
        Ok(mapping)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        SchemaMapping::from_text(&std::fs::read_to_string(path)?)
    }

    fn source_column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.columns.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    fn scale(&self, canonical: &str) -> f64 {
        self.scales.get(canonical).copied().unwrap_or(1.0)
    }
}

/// What a load saw: row counts, duplicate resolution, continuity gaps, and
/// free-form notes (clamped bids, floored quantiles, crossing flags).
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub path: String,
    pub kind: SeriesKind,
    pub rows_read: usize,
    pub rows_out: usize,
    pub duplicates: usize,
    /// Missing half-hours between the first and last period present.
    pub gaps: Vec<Period>,
    pub notes: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} [{}]: {} rows read, {} rows out, {} duplicates, {} gaps",
            self.path,
            self.kind.label(),
            self.rows_read,
            self.rows_out,
            self.duplicates,
            self.gaps.len()
        )?;
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: i + 2,
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows })
}

struct ColumnView<'a> {
    path: &'a Path,
    mapping: &'a SchemaMapping,
    index: BTreeMap<&'a str, usize>,
}

impl<'a> ColumnView<'a> {
    fn new(
        path: &'a Path,
        table: &'a RawTable,
        mapping: &'a SchemaMapping,
        kind: SeriesKind,
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        for canonical in kind.required_columns() {
            let source = mapping.source_column(canonical);
            let pos = table
                .headers
                .iter()
                .position(|h| h == source)
                .ok_or_else(|| Error::Load {
                    path: path.display().to_string(),
                    row: 1,
                    message: format!("required column '{canonical}' (source '{source}') not found"),
                })?;
            index.insert(*canonical, pos);
        }
        // optional columns
        for canonical in ["total_mwh", "available_capacity_mwh"] {
            let source = mapping.source_column(canonical);
            if let Some(pos) = table.headers.iter().position(|h| h == source) {
                index.insert(canonical, pos);
            }
        }
        Ok(ColumnView {
            path,
            mapping,
            index,
        })
    }

    fn err(&self, row: usize, message: String) -> Error {
        Error::Load {
            path: self.path.display().to_string(),
            row,
            message,
        }
    }

    fn has(&self, canonical: &str) -> bool {
        self.index.contains_key(canonical)
    }

    fn text<'r>(&self, row: &'r [String], rowno: usize, canonical: &str) -> Result<&'r str> {
        let pos = *self
            .index
            .get(canonical)
            .ok_or_else(|| self.err(rowno, format!("column '{canonical}' not mapped")))?;
        row.get(pos)
            .map(String::as_str)
            .ok_or_else(|| self.err(rowno, format!("row too short for '{canonical}'")))
    }

    fn number(&self, row: &[String], rowno: usize, canonical: &str) -> Result<f64> {
        let raw = self.text(row, rowno, canonical)?;
        let value: f64 = raw
            .parse()
            .map_err(|e| self.err(rowno, format!("cannot parse {canonical}='{raw}': {e}")))?;
        if !value.is_finite() {
            return Err(self.err(rowno, format!("{canonical} is not finite")));
        }
        Ok(value * self.mapping.scale(canonical))
    }

    fn period(&self, row: &[String], rowno: usize) -> Result<Period> {
        let raw = self.text(row, rowno, "period_start_utc")?;
        let parse_err = |e: String| self.err(rowno, format!("timestamp '{raw}': {e}"));
        let naive = match &self.mapping.timestamp_format {
            Some(fmt) => NaiveDateTime::parse_from_str(raw, fmt).map_err(|e| parse_err(e.to_string()))?,
            None => {
                return match Period::parse(raw) {
                    Ok(p) if self.mapping.timezone == SourceTimezone::Utc => Ok(p),
                    Ok(_) => Err(parse_err("RFC 3339 input must use timezone = UTC".into())),
                    Err(e) => Err(parse_err(e.to_string())),
                }
            }
        };
        let utc = match self.mapping.timezone {
            SourceTimezone::Utc => Utc.from_utc_datetime(&naive),
            SourceTimezone::GbLocal => match London.from_local_datetime(&naive) {
                LocalResult::Single(t) => t.with_timezone(&Utc),
                // the repeated autumn hour resolves to its first occurrence
                LocalResult::Ambiguous(first, _) => first.with_timezone(&Utc),
                LocalResult::None => {
                    return Err(parse_err("local time does not exist (clock change)".into()))
                }
            },
        };
        Period::new(utc).map_err(|e| parse_err(e.to_string()))
    }
}

fn continuity_gaps(periods: &BTreeSet<Period>) -> Vec<Period> {
    let mut gaps = Vec::new();
    let (Some(&first), Some(&last)) = (periods.first(), periods.last()) else {
        return gaps;
    };
    let mut cursor = first;
    while cursor < last {
        if !periods.contains(&cursor) {
            gaps.push(cursor);
        }
        cursor = cursor.next();
    }
    gaps
}

fn check_granularity(path: &Path, periods: &BTreeSet<Period>) -> Result<()> {
    // A half-hourly file of any real length contains :30 starts; a purely
    // on-the-hour file is hourly data in disguise.
    if periods.len() >= 4 && periods.iter().all(|p| p.start().format("%M").to_string() == "00") {
        return Err(Error::Load {
            path: path.display().to_string(),
            row: 0,
            message: "timestamps are all on the hour; input looks hourly, expected half-hourly"
                .into(),
        });
    }
    Ok(())
}

/// One half-hour of realised production.
#[derive(Debug, Clone, Copy)]
pub struct ProductionRow {
    pub period: Period,
    pub wind_mwh: f64,
    pub solar_mwh: f64,
    pub total_mwh: f64,
    pub available_capacity_mwh: Option<f64>,
}

/// Load realised wind/solar production. The total column is optional and
/// checked against wind + solar when present.
pub fn load_production(
    path: &Path,
    mapping: &SchemaMapping,
) -> Result<(BTreeMap<Period, ProductionRow>, ValidationReport)> {
    let table = read_table(path)?;
    let view = ColumnView::new(path, &table, mapping, SeriesKind::Production)?;
    let mut out: BTreeMap<Period, ProductionRow> = BTreeMap::new();
    let mut duplicates = 0usize;
    for (i, row) in table.rows.iter().enumerate() {
        let rowno = i + 2;
        let period = view.period(row, rowno)?;
        let wind = view.number(row, rowno, "wind_mwh")?;
        let solar = view.number(row, rowno, "solar_mwh")?;
        if wind < 0.0 || solar < 0.0 {
            return Err(view.err(rowno, "negative production".into()));
        }
        let total = if view.has("total_mwh") {
            let t = view.number(row, rowno, "total_mwh")?;
            if (t - (wind + solar)).abs() > 1e-6 {
                return Err(view.err(
                    rowno,
                    format!("total {t} disagrees with wind {wind} + solar {solar}"),
                ));
            }
            t
        } else {
            wind + solar
        };
        let capacity = if view.has("available_capacity_mwh") {
            let raw = view.text(row, rowno, "available_capacity_mwh")?;
            if raw.is_empty() {
                None
            } else {
                Some(view.number(row, rowno, "available_capacity_mwh")?)
            }
        } else {
            None
        };
        if out
            .insert(
                period,
                ProductionRow {
                    period,
                    wind_mwh: wind,
                    solar_mwh: solar,
                    total_mwh: total,
                    available_capacity_mwh: capacity,
                },
            )
            .is_some()
        {
            duplicates += 1;
        }
    }
    let periods: BTreeSet<Period> = out.keys().copied().collect();
    check_granularity(path, &periods)?;
    let report = ValidationReport {
        path: path.display().to_string(),
        kind: SeriesKind::Production,
        rows_read: table.rows.len(),
        rows_out: out.len(),
        duplicates,
        gaps: continuity_gaps(&periods),
        notes: Vec::new(),
    };
    Ok((out, report))
}

/// Load day-ahead and system prices.
pub fn load_prices(
    path: &Path,
    mapping: &SchemaMapping,
) -> Result<(BTreeMap<Period, MarketPrices>, ValidationReport)> {
    let table = read_table(path)?;
    let view = ColumnView::new(path, &table, mapping, SeriesKind::Prices)?;
    let mut out: BTreeMap<Period, MarketPrices> = BTreeMap::new();
    let mut duplicates = 0usize;
    for (i, row) in table.rows.iter().enumerate() {
        let rowno = i + 2;
        let period = view.period(row, rowno)?;
        let prices = MarketPrices {
            period,
            da_price: view.number(row, rowno, "da_price")?,
            ss_price: view.number(row, rowno, "ss_price")?,
        };
        if out.insert(period, prices).is_some() {
            duplicates += 1;
        }
    }
    let periods: BTreeSet<Period> = out.keys().copied().collect();
    check_granularity(path, &periods)?;
    let report = ValidationReport {
        path: path.display().to_string(),
        kind: SeriesKind::Prices,
        rows_read: table.rows.len(),
        rows_out: out.len(),
        duplicates,
        gaps: continuity_gaps(&periods),
        notes: Vec::new(),
    };
    Ok((out, report))
}

/// Load one team's submissions: nine quantiles and a bid per period.
/// Negative quantiles are floored at zero, bids are clamped into
/// `[0, bid_cap]`, and quantile crossing is flagged; all three are counted in
/// the report notes rather than failing the load.
pub fn load_submissions(
    path: &Path,
    mapping: &SchemaMapping,
    bid_cap: f64,
) -> Result<(TeamSeries, ValidationReport)> {
    let table = read_table(path)?;
    let view = ColumnView::new(path, &table, mapping, SeriesKind::Submissions)?;
    let mut series = TeamSeries::default();
    let mut duplicates = 0usize;
    let mut floored = 0usize;
    let mut clamped = 0usize;
    let mut crossed = 0usize;
    const QUANTILE_COLUMNS: [&str; 9] = [
        "q10", "q20", "q30", "q40", "q50", "q60", "q70", "q80", "q90",
    ];
    for (i, row) in table.rows.iter().enumerate() {
        let rowno = i + 2;
        let period = view.period(row, rowno)?;
        let mut values = [0.0; 9];
        for (j, col) in QUANTILE_COLUMNS.iter().enumerate() {
            let v = view.number(row, rowno, col)?;
            if v < 0.0 {
                floored += 1;
            }
            values[j] = v.max(0.0);
        }
        let raw_bid = view.number(row, rowno, "bid")?;
        let bid = raw_bid.clamp(0.0, bid_cap);
        if bid != raw_bid {
            clamped += 1;
        }
        let forecast = QuantileForecast::new(period, values)
            .map_err(|e| view.err(rowno, e.to_string()))?;
        if !forecast.is_monotone() {
            crossed += 1;
        }
        if series.entries.contains_key(&period) {
            duplicates += 1;
        }
        series.insert(period, forecast, bid);
    }
    let mut notes = Vec::new();
    if floored > 0 {
        notes.push(format!("{floored} negative quantile values floored at 0"));
    }
    if clamped > 0 {
        notes.push(format!("{clamped} bids clamped into [0, {bid_cap}]"));
    }
    if crossed > 0 {
        notes.push(format!("{crossed} periods with crossed quantiles (kept as submitted)"));
    }
    let periods: BTreeSet<Period> = series.entries.keys().copied().collect();
    let report = ValidationReport {
        path: path.display().to_string(),
        kind: SeriesKind::Submissions,
        rows_read: table.rows.len(),
        rows_out: series.entries.len(),
        duplicates,
        gaps: continuity_gaps(&periods),
        notes,
    };
    Ok((series, report))
}

/// Load an available-capacity series (for outage-aware forecast clipping).
pub fn load_capacity(
    path: &Path,
    mapping: &SchemaMapping,
) -> Result<(BTreeMap<Period, f64>, ValidationReport)> {
    let table = read_table(path)?;
    let view = ColumnView::new(path, &table, mapping, SeriesKind::Capacity)?;
    let mut out: BTreeMap<Period, f64> = BTreeMap::new();
    let mut duplicates = 0usize;
    for (i, row) in table.rows.iter().enumerate() {
        let rowno = i + 2;
        let period = view.period(row, rowno)?;
        let capacity = view.number(row, rowno, "available_capacity_mwh")?;
        if capacity < 0.0 {
            return Err(view.err(rowno, "negative capacity".into()));
        }
        if out.insert(period, capacity).is_some() {
            duplicates += 1;
        }
    }
    let periods: BTreeSet<Period> = out.keys().copied().collect();
    check_granularity(path, &periods)?;
    let report = ValidationReport {
        path: path.display().to_string(),
        kind: SeriesKind::Capacity,
        rows_read: table.rows.len(),
        rows_out: out.len(),
        duplicates,
        gaps: continuity_gaps(&periods),
        notes: Vec::new(),
    };
    Ok((out, report))
}

/// Write canonical production CSV.
pub fn write_production(path: &Path, rows: &BTreeMap<Period, ProductionRow>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "period_start_utc",
        "wind_mwh",
        "solar_mwh",
        "total_mwh",
        "available_capacity_mwh",
    ])?;
    for row in rows.values() {
        w.write_record([
            row.period.to_iso(),
            format_float(row.wind_mwh),
            format_float(row.solar_mwh),
            format_float(row.total_mwh),
            row.available_capacity_mwh.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write canonical prices CSV.
pub fn write_prices(path: &Path, rows: &BTreeMap<Period, MarketPrices>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["period_start_utc", "da_price", "ss_price"])?;
    for row in rows.values() {
        w.write_record([
            row.period.to_iso(),
            format_float(row.da_price),
            format_float(row.ss_price),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write canonical submissions CSV.
pub fn write_submissions(path: &Path, series: &TeamSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "period_start_utc",
        "q10",
        "q20",
        "q30",
        "q40",
        "q50",
        "q60",
        "q70",
        "q80",
        "q90",
        "bid",
    ])?;
    for (period, entry) in &series.entries {
        let mut record = vec![period.to_iso()];
        record.extend(entry.forecast.values.iter().map(|v| format_float(*v)));
        record.push(format_float(entry.bid));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that round-trips an f64 exactly.
pub fn format_float(v: f64) -> String {
    let mut buf = ryu_style(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_style(v: f64) -> String {
    // {:?} on f64 is the shortest round-trip representation
    format!("{v:?}")
}

/// Why a period was excluded from the aligned table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub period: Period,
    /// Names of the series that lack this period.
    pub missing_from: Vec<String>,
}

/// Inner join over named period sets with per-period exclusion reasons.
#[derive(Debug, Clone)]
pub struct AlignmentMask {
    pub included: Vec<Period>,
    pub excluded: Vec<Exclusion>,
}

/// Align two or more named series on period id. The mask is independent of
/// input order; exclusion reasons name every series missing the period.
pub fn align(series: &[(&str, BTreeSet<Period>)]) -> Result<AlignmentMask> {
    if series.len() < 2 {
        return Err(Error::Alignment(format!(
            "need at least 2 series, got {}",
            series.len()
        )));
    }
    let mut universe: BTreeSet<Period> = BTreeSet::new();
    for (_, periods) in series {
        universe.extend(periods.iter().copied());
    }
    let mut included = Vec::new();
    let mut excluded = Vec::new();
    for period in universe {
        let mut missing: Vec<String> = series
            .iter()
            .filter(|(_, periods)| !periods.contains(&period))
            .map(|(name, _)| name.to_string())
            .collect();
        if missing.is_empty() {
            included.push(period);
        } else {
            missing.sort();
            excluded.push(Exclusion {
                period,
                missing_from: missing,
            });
        }
    }
    if included.is_empty() {
        return Err(Error::Alignment("no common periods across series".into()));
    }
    Ok(AlignmentMask { included, excluded })
}
