//! Option-chain and market data: file ingestion, derived series, and a
//! seeded synthetic generator.

mod csv_io;
mod market;
mod synth;

pub use csv_io::{
    load_bars_csv, load_chain_csv, load_dividends_csv, load_macro_csv, load_market_dir,
    load_rates_csv, write_bars_csv, write_chain_csv, write_dividends_csv, write_macro_csv,
    write_market_dir, write_rates_csv, ChainLoad, DataFiles, CHAIN_COLUMNS,
};
pub use market::{put_call_ratio, rate_for_dte, realized_vol, MarketData};
pub use synth::{generate_synthetic_dataset, SynthConfig, SyntheticDataset};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trailing window for the historical volatility feature.
pub const HIST_VOL_WINDOW: usize = 30;
/// Trailing window for the short realized volatility feature.
pub const REALIZED_VOL_WINDOW: usize = 20;
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: missing required columns: {}", missing.join(", "))]
    Schema { path: String, missing: Vec<String> },
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("insufficient history: need {needed} bars on or before {as_of}, have {available}")]
    InsufficientHistory {
        as_of: NaiveDate,
        needed: usize,
        available: usize,
    },
    #[error("no {what} available on or before {date}")]
    MissingMarketData { what: &'static str, date: NaiveDate },
    #[error("invalid rate curve: {0}")]
    RateCurve(String),
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Pricing(#[from] crate::pricing::PricingError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One option-chain row for a call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    /// Calendar days from quote to expiry; always >= 1.
    pub dte: i64,
    pub underlying_last: f64,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub last: f64,
    pub volume: u64,
    pub implied_vol: f64,
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub theta: f64,
    pub rho: f64,
}

impl OptionQuote {
    /// Regression label: the bid/ask mid, or `last` for a quote with no
    /// market on either side.
    pub fn mid_price(&self) -> f64 {
        mid_price(self.bid, self.ask, self.last)
    }
}

pub fn mid_price(bid: f64, ask: f64, last: f64) -> f64 {
    if bid == 0.0 && ask == 0.0 {
        last
    } else {
        (bid + ask) / 2.0
    }
}

/// Treasury curve as `(maturity_days, rate)` knots, strictly increasing in
/// maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve(Vec<(u32, f64)>);

impl RateCurve {
    pub fn new(mut knots: Vec<(u32, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(DataError::RateCurve("curve has no knots".into()));
        }
        knots.sort_by_key(|k| k.0);
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(DataError::RateCurve("duplicate maturity".into()));
        }
        if knots.iter().any(|k| !k.1.is_finite()) {
            return Err(DataError::RateCurve("non-finite rate".into()));
        }
        Ok(Self(knots))
    }

    pub fn knots(&self) -> &[(u32, f64)] {
        &self.0
    }
}

/// Market and macro state on one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketContext {
    pub date: NaiveDate,
    pub vix: f64,
    pub put_call_ratio: f64,
    pub gdp_growth: f64,
    pub inflation_rate: f64,
    pub unemployment_rate: f64,
    pub dividend_yield: f64,
    pub next_ex_div_date: Option<NaiveDate>,
    pub rate_curve: RateCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnderlyingBar {
    pub date: NaiveDate,
    pub close: f64,
}

/// One row of the macro CSV after forward-filling empty fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroRow {
    pub date: NaiveDate,
    pub vix: f64,
    pub put_call_ratio: f64,
    pub gdp_growth: f64,
    pub inflation_rate: f64,
    pub unemployment_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DividendRecord {
    pub ex_div_date: NaiveDate,
    pub dividend_yield: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub date: NaiveDate,
    pub maturity_days: u32,
    pub rate: f64,
}
