//! Settlement periods, slots of day, and market-day calendars.
//!
//! GB trades and settles in 30-minute periods. A settlement "market day" is a
//! local calendar day in the Europe/London zone, so days on which the clocks
//! change contain 46 or 50 half-hours instead of 48. Synthetic datasets can opt
//! into plain UTC days instead.

use crate::error::{Error, Result};
use chrono::{DateTime, Duration, NaiveDate, TimeZone, Timelike, Utc};
use chrono_tz::Europe::London;

/// Start of one 30-minute settlement period, always in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period(DateTime<Utc>);

impl Period {
    /// Wrap a UTC timestamp, requiring it to sit on a half-hour boundary.
    pub fn new(start: DateTime<Utc>) -> Result<Self> {
        if !start.minute().is_multiple_of(30) || start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::InvalidInput(format!(
                "period start {start} is not on a half-hour boundary"
            )));
        }
        Ok(Period(start))
    }

    /// Construct from date and half-hour slot index (0..=47) in UTC.
    pub fn from_utc_slot(date: NaiveDate, slot: u32) -> Result<Self> {
        if slot >= 48 {
            return Err(Error::InvalidInput(format!("slot {slot} out of range")));
        }
        let t = date
            .and_hms_opt(slot / 2, (slot % 2) * 30, 0)
            .ok_or_else(|| Error::InvalidInput(format!("invalid date {date}")))?;
        Ok(Period(Utc.from_utc_datetime(&t)))
    }

    /// Parse an ISO-8601 timestamp (`2024-02-20T00:00:00Z` or with offset).
    pub fn parse(s: &str) -> Result<Self> {
        let dt = DateTime::parse_from_rfc3339(s)
            .map_err(|e| Error::InvalidInput(format!("cannot parse period '{s}': {e}")))?;
        Period::new(dt.with_timezone(&Utc))
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.0
    }

    /// Half-hour slot of the UTC day, 0..=47.
    pub fn slot(&self) -> u32 {
        self.0.hour() * 2 + self.0.minute() / 30
    }

    /// Daytime is 08:00 <= start < 20:00 UTC; everything else is overnight.
    pub fn is_daytime(&self) -> bool {
        (16..40).contains(&self.slot())
    }

    /// The market day this period settles under, per the given convention.
    pub fn market_day(&self, convention: DayConvention) -> NaiveDate {
        match convention {
            DayConvention::GbLocal => self.0.with_timezone(&London).date_naive(),
            DayConvention::Utc => self.0.date_naive(),
        }
    }

    pub fn next(&self) -> Period {
        Period(self.0 + Duration::minutes(30))
    }

    /// Canonical text form used in all emitted tables.
    pub fn to_iso(&self) -> String {
        self.0.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }
}

impl std::fmt::Display for Period {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_iso())
    }
}

/// How settlement periods are grouped into market days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DayConvention {
    /// Europe/London calendar days (46/48/50 periods across DST changes).
    #[default]
    GbLocal,
    /// Plain UTC calendar days, for synthetic fixtures.
    Utc,
}

/// Inclusive range of market days defining a replay window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub convention: DayConvention,
}

impl Window {
    pub fn new(first_day: NaiveDate, last_day: NaiveDate, convention: DayConvention) -> Result<Self> {
        if first_day > last_day {
            return Err(Error::Config(format!(
                "window start {first_day} after end {last_day}"
            )));
        }
        Ok(Window {
            first_day,
            last_day,
            convention,
        })
    }

    /// The 2024 competition window: deliveries from 20 Feb to 19 May inclusive.
    pub fn competition_2024() -> Self {
        Window {
            first_day: NaiveDate::from_ymd_opt(2024, 2, 20).unwrap(),
            last_day: NaiveDate::from_ymd_opt(2024, 5, 19).unwrap(),
            convention: DayConvention::GbLocal,
        }
    }

    pub fn contains(&self, period: Period) -> bool {
        let day = period.market_day(self.convention);
        day >= self.first_day && day <= self.last_day
    }

    /// Market days in order.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut d = self.first_day;
        while d <= self.last_day {
            out.push(d);
            d = d.succ_opt().expect("date overflow");
        }
        out
    }

    pub fn day_count(&self) -> usize {
        (self.last_day - self.first_day).num_days() as usize + 1
    }

    /// All settlement periods belonging to a market day under this window's
    /// convention, in chronological order.
    pub fn periods_of_day(&self, day: NaiveDate) -> Vec<Period> {
        match self.convention {
            DayConvention::Utc => (0..48)
                .map(|s| Period::from_utc_slot(day, s).unwrap())
                .collect(),
            DayConvention::GbLocal => {
                // Scan UTC half-hours from the day before to the day after and keep
                // those whose London-local date matches. Handles 46/48/50-period days.
                let mut out = Vec::new();
                let prev = day.pred_opt().expect("date underflow");
                let mut p = Period::from_utc_slot(prev, 0).unwrap();
                for _ in 0..(3 * 48) {
                    if p.market_day(DayConvention::GbLocal) == day {
                        out.push(p);
                    }
                    p = p.next();
                }
                out
            }
        }
    }

    /// All periods of the window in chronological order.
    pub fn periods(&self) -> Vec<Period> {
        self.days()
            .into_iter()
            .flat_map(|d| self.periods_of_day(d))
            .collect()
    }
}

/// Submission deadline for a delivery day: 09:20 UTC on the prior day.
pub fn submission_deadline(delivery_day: NaiveDate) -> DateTime<Utc> {
    let d = delivery_day.pred_opt().expect("date underflow");
    Utc.from_utc_datetime(&d.and_hms_opt(9, 20, 0).unwrap())
}

/// Time filter used by scoring and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DayWindow {
    #[default]
    All,
    Daytime,
    Overnight,
}

impl DayWindow {
    pub fn includes(&self, period: Period) -> bool {
        match self {
            DayWindow::All => true,
            DayWindow::Daytime => period.is_daytime(),
            DayWindow::Overnight => !period.is_daytime(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DayWindow::All => "all",
            DayWindow::Daytime => "daytime",
            DayWindow::Overnight => "overnight",
        }
    }
}
