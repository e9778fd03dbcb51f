//! Run configuration: flat key-value sections loadable from file, overridable
//! from the command line, hashed for output provenance.

use crate::error::{Error, Result};
use crate::ini;
use crate::market::MarketImpactCoefficient;
use crate::strategy::StrategyKind;
use crate::time::{DayConvention, Period, Window};
use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Everything a replay run needs. Defaults reproduce the 2024 competition.
#[derive(Debug, Clone)]
pub struct RunConfig {
    // [data]
    pub data_dir: PathBuf,
    pub production_file: String,
    pub prices_file: String,
    pub teams_file: String,
    pub submissions_dir: String,
    pub production_mapping: Option<String>,
    pub prices_mapping: Option<String>,
    pub submissions_mapping: Option<String>,
    pub benchmark_team: String,
    // [window]
    pub window: Window,
    // [market]
    pub k: MarketImpactCoefficient,
    pub bid_floor: f64,
    pub bid_cap: f64,
    // [strategy]
    pub strategies: Vec<StrategyKind>,
    pub climatology_window_days: u32,
    pub strategy_forecast_team: String,
    // [analytics]
    pub var_level: f64,
    pub pinball_threshold: f64,
    pub outlier_exclusions: Vec<String>,
    pub histogram_bin_width: f64,
    pub histogram_lo: f64,
    pub histogram_hi: f64,
    pub volume_epsilon: f64,
    pub risk_exclude_days: u32,
    pub sanitize_probprofit: bool,
    pub probprofit_team: String,
    pub probprofit_period: Period,
    // [run]
    pub out_dir: PathBuf,
    pub seed: u64,
    /// When non-empty, restrict the replay to these teams (benchmark is
    /// always kept for filling).
    pub team_filter: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            production_file: "production.csv".into(),
            prices_file: "prices.csv".into(),
            teams_file: "teams.csv".into(),
            submissions_dir: "submissions".into(),
            production_mapping: None,
            prices_mapping: None,
            submissions_mapping: None,
            benchmark_team: "Benchmark".into(),
            window: Window::competition_2024(),
            k: MarketImpactCoefficient::default(),
            bid_floor: 0.0,
            bid_cap: 1800.0,
            strategies: vec![
                StrategyKind::Median,
                StrategyKind::ExpectedOptimal,
                StrategyKind::Learned,
            ],
            climatology_window_days: 30,
            strategy_forecast_team: "SVK".into(),
            var_level: 0.05,
            pinball_threshold: 31.0,
            outlier_exclusions: vec!["LSEG Power Team".into()],
            histogram_bin_width: 25.0,
            histogram_lo: -1000.0,
            histogram_hi: 1000.0,
            volume_epsilon: 1e-9,
            risk_exclude_days: 7,
            sanitize_probprofit: false,
            probprofit_team: "ProbProfit".into(),
            probprofit_period: Period::parse("2024-05-16T22:00:00Z").expect("valid period"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            team_filter: Vec::new(),
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::Config(format!("bad date '{s}': {e}")))
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("bad boolean '{other}'"))),
    }
}

impl RunConfig {
    /// Parse a config file; unknown keys are rejected so typos surface.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::from_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let sections = ini::parse(text)?;
        let mut window_start = self.window.first_day;
        let mut window_end = self.window.last_day;
        let mut convention = self.window.convention;
        for (section, entries) in &sections {
            for (key, value) in entries {
                match (section.as_str(), key.as_str()) {
                    ("data", "data_dir") => self.data_dir = PathBuf::from(value),
                    ("data", "production") => self.production_file = value.clone(),
                    ("data", "prices") => self.prices_file = value.clone(),
                    ("data", "teams") => self.teams_file = value.clone(),
                    ("data", "submissions_dir") => self.submissions_dir = value.clone(),
                    ("data", "production_mapping") => {
                        self.production_mapping = Some(value.clone())
                    }
                    ("data", "prices_mapping") => self.prices_mapping = Some(value.clone()),
                    ("data", "submissions_mapping") => {
                        self.submissions_mapping = Some(value.clone())
                    }
                    ("data", "benchmark_team") => self.benchmark_team = value.clone(),
                    ("window", "start") => window_start = parse_date(value)?,
                    ("window", "end") => window_end = parse_date(value)?,
                    ("window", "day_convention") => {
                        convention = match value.as_str() {
                            "gb_local" => DayConvention::GbLocal,
                            "utc" => DayConvention::Utc,
                            other => {
                                return Err(Error::Config(format!(
                                    "day_convention must be gb_local or utc, got '{other}'"
                                )))
                            }
                        }
                    }
                    ("market", "k") => {
                        self.k = MarketImpactCoefficient::new(
                            value
                                .parse()
                                .map_err(|e| Error::Config(format!("bad k '{value}': {e}")))?,
                        )?
                    }
                    ("market", "bid_floor") => self.bid_floor = parse_num(value, "bid_floor")?,
                    ("market", "bid_cap") => self.bid_cap = parse_num(value, "bid_cap")?,
                    ("strategy", "kinds") => {
                        self.strategies = parse_list(value)
                            .iter()
                            .map(|s| StrategyKind::parse(s))
                            .collect::<Result<_>>()?
                    }
                    ("strategy", "climatology_window_days") => {
                        self.climatology_window_days =
                            value.parse().map_err(|e| {
                                Error::Config(format!("bad climatology window: {e}"))
                            })?
                    }
                    ("strategy", "forecast_team") => {
                        self.strategy_forecast_team = value.clone()
                    }
                    ("analytics", "var_level") => self.var_level = parse_num(value, "var_level")?,
                    ("analytics", "pinball_threshold") => {
                        self.pinball_threshold = parse_num(value, "pinball_threshold")?
                    }
                    ("analytics", "outlier_exclusions") => {
                        self.outlier_exclusions = parse_list(value)
                    }
                    ("analytics", "histogram_bin_width") => {
                        self.histogram_bin_width = parse_num(value, "histogram_bin_width")?
                    }
                    ("analytics", "histogram_lo") => {
                        self.histogram_lo = parse_num(value, "histogram_lo")?
                    }
                    ("analytics", "histogram_hi") => {
                        self.histogram_hi = parse_num(value, "histogram_hi")?
                    }
                    ("analytics", "volume_epsilon") => {
                        self.volume_epsilon = parse_num(value, "volume_epsilon")?
                    }
                    ("analytics", "risk_exclude_days") => {
                        self.risk_exclude_days = value
                            .parse()
                            .map_err(|e| Error::Config(format!("bad risk_exclude_days: {e}")))?
                    }
                    ("analytics", "sanitize_probprofit") => {
                        self.sanitize_probprofit = parse_bool(value)?
                    }
                    ("analytics", "probprofit_team") => self.probprofit_team = value.clone(),
                    ("analytics", "probprofit_period") => {
                        self.probprofit_period = Period::parse(value)?
                    }
                    ("run", "out_dir") => self.out_dir = PathBuf::from(value),
                    ("run", "seed") => {
                        self.seed = value
                            .parse()
                            .map_err(|e| Error::Config(format!("bad seed: {e}")))?
                    }
                    ("run", "teams") => self.team_filter = parse_list(value),
                    (section, key) => {
                        return Err(Error::Config(format!(
                            "unknown config key [{section}] {key}"
                        )))
                    }
                }
            }
        }
        self.window = Window::new(window_start, window_end, convention)?;
        Ok(())
    }

    /// Resolve a data file path relative to the data directory.
    pub fn data_path(&self, name: &str) -> PathBuf {
        self.data_dir.join(name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bid_floor > self.bid_cap {
            return Err(Error::Config(format!(
                "bid_floor {} above bid_cap {}",
                self.bid_floor, self.bid_cap
            )));
        }
        if !(self.var_level > 0.0 && self.var_level < 1.0) {
            return Err(Error::Config(format!("var_level {} outside (0,1)", self.var_level)));
        }
        if self.climatology_window_days < 1 {
            return Err(Error::Config("climatology window must be >= 1".into()));
        }
        if !self.data_dir.is_dir() {
            return Err(Error::Config(format!(
                "data_dir {} does not exist",
                self.data_dir.display()
            )));
        }
        for file in [
            &self.production_file,
            &self.prices_file,
            &self.teams_file,
        ] {
            let path = self.data_path(file);
            if !path.is_file() {
                return Err(Error::Config(format!("missing input {}", path.display())));
            }
        }
        Ok(())
    }

    /// Canonical text form: every setting as a sorted `section.key=value`
    /// line. This is what gets hashed.
    pub fn canonical_text(&self) -> String {
        let mut lines = vec![
            format!("analytics.histogram_bin_width={}", self.histogram_bin_width),
            format!("analytics.histogram_hi={}", self.histogram_hi),
            format!("analytics.histogram_lo={}", self.histogram_lo),
            format!(
                "analytics.outlier_exclusions={}",
                self.outlier_exclusions.join(",")
            ),
            format!("analytics.pinball_threshold={}", self.pinball_threshold),
            format!("analytics.probprofit_period={}", self.probprofit_period),
            format!("analytics.probprofit_team={}", self.probprofit_team),
            format!("analytics.risk_exclude_days={}", self.risk_exclude_days),
            format!("analytics.sanitize_probprofit={}", self.sanitize_probprofit),
            format!("analytics.var_level={}", self.var_level),
            format!("analytics.volume_epsilon={}", self.volume_epsilon),
            format!("data.benchmark_team={}", self.benchmark_team),
            format!("data.data_dir={}", self.data_dir.display()),
            format!("data.prices={}", self.prices_file),
            format!(
                "data.prices_mapping={}",
                self.prices_mapping.as_deref().unwrap_or("")
            ),
            format!("data.production={}", self.production_file),
            format!(
                "data.production_mapping={}",
                self.production_mapping.as_deref().unwrap_or("")
            ),
            format!("data.submissions_dir={}", self.submissions_dir),
            format!(
                "data.submissions_mapping={}",
                self.submissions_mapping.as_deref().unwrap_or("")
            ),
            format!("data.teams={}", self.teams_file),
            format!("market.bid_cap={}", self.bid_cap),
            format!("market.bid_floor={}", self.bid_floor),
            format!("market.k={}", self.k.value()),
            format!(
                "strategy.climatology_window_days={}",
                self.climatology_window_days
            ),
            format!("strategy.forecast_team={}", self.strategy_forecast_team),
            format!(
                "strategy.kinds={}",
                self.strategies
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("run.seed={}", self.seed),
            format!("run.teams={}", self.team_filter.join(",")),
            format!(
                "window.day_convention={}",
                match self.window.convention {
                    DayConvention::GbLocal => "gb_local",
                    DayConvention::Utc => "utc",
                }
            ),
            format!("window.end={}", self.window.last_day),
            format!("window.start={}", self.window.first_day),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// First 16 hex chars of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_num(value: &str, name: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad {name} '{value}': {e}")))
}
