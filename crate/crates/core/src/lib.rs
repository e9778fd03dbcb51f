//! Backtest engine for the HEFTcom 2024 day-ahead forecasting and trading
//! competition.

pub mod analytics;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod ini;
pub mod leaderboard;
pub mod market;
pub mod output;
pub mod quantiles;
pub mod replay;
pub mod scoring;
pub mod strategy;
pub mod team;
pub mod time;

pub use error::{Error, Result};
