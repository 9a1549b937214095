use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    DataError, DividendRecord, MacroRow, MarketData, OptionQuote, RatePoint, Result,
    UnderlyingBar,
};

pub const CHAIN_COLUMNS: [&str; 14] = [
    "quote_date",
    "expiry_date",
    "underlying_last",
    "strike",
    "bid",
    "ask",
    "last",
    "volume",
    "implied_vol",
    "delta",
    "gamma",
    "vega",
    "theta",
    "rho",
];
const MACRO_COLUMNS: [&str; 6] = [
    "date",
    "vix",
    "put_call_ratio",
    "gdp_growth",
    "inflation_rate",
    "unemployment_rate",
];
const DIVIDEND_COLUMNS: [&str; 2] = ["ex_div_date", "dividend_yield"];
const RATE_COLUMNS: [&str; 3] = ["date", "maturity_days", "rate"];
const BAR_COLUMNS: [&str; 2] = ["date", "close"];

#[derive(Debug, Serialize, Deserialize)]
struct ChainRecord {
    quote_date: NaiveDate,
    expiry_date: NaiveDate,
    underlying_last: f64,
    strike: f64,
    bid: f64,
    ask: f64,
    last: f64,
    volume: u64,
    implied_vol: Option<f64>,
    delta: f64,
    gamma: f64,
    vega: f64,
    theta: f64,
    rho: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MacroRecord {
    date: NaiveDate,
    vix: Option<f64>,
    put_call_ratio: Option<f64>,
    gdp_growth: Option<f64>,
    inflation_rate: Option<f64>,
    unemployment_rate: Option<f64>,
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, err: csv::Error) -> DataError {
    match err.position() {
        Some(pos) => DataError::Parse {
            path: path.display().to_string(),
            line: pos.line(),
            message: match err.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => err.to_string(),
            },
        },
        None => DataError::Csv {
            path: path.display().to_string(),
            source: err,
        },
    }
}

/// Reads every row of a headed CSV after checking that `required` columns
/// are present. Rows come back with their 1-based file line numbers.
fn read_rows<T: DeserializeOwned>(path: &Path, required: &[&str]) -> Result<Vec<(u64, T)>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let missing: Vec<String> = required
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(DataError::Schema {
            path: path.display().to_string(),
            missing,
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        match rec {
            Ok(row) => out.push(row),
            Err(e) => return Err(csv_err(path, e)),
        }
    }
    Ok(out.into_iter().enumerate().map(|(i, r)| (i as u64 + 2, r)).collect())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<usize> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut n = 0;
    for row in rows {
        wtr.serialize(row).map_err(|e| csv_err(path, e))?;
        n += 1;
    }
    wtr.flush().map_err(|e| io_err(path, e))?;
    Ok(n)
}

/// Quotes retained from a chain file plus the number of rows rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLoad {
    pub quotes: Vec<OptionQuote>,
    pub dropped: usize,
}

fn reject_reason(r: &ChainRecord, dte: i64) -> Option<&'static str> {
    if dte <= 0 {
        return Some("non-positive dte");
    }
    if !(r.underlying_last > 0.0) || !(r.strike > 0.0) {
        return Some("non-positive underlying or strike");
    }
    match r.implied_vol {
        Some(v) if v > 0.0 && v.is_finite() => {}
        _ => return Some("missing implied_vol"),
    }
    if !(r.bid >= 0.0) || !(r.ask >= r.bid) || !(r.last >= 0.0) {
        return Some("crossed or negative market");
    }
    let greeks = [r.delta, r.gamma, r.vega, r.theta, r.rho];
    if greeks.iter().any(|g| !g.is_finite()) {
        return Some("non-finite greek");
    }
    None
}

/// Loads a chain CSV. Rows that cannot satisfy the quote invariants are
/// dropped and counted rather than failing the load.
pub fn load_chain_csv(path: impl AsRef<Path>) -> Result<ChainLoad> {
    let path = path.as_ref();
    let rows: Vec<(u64, ChainRecord)> = read_rows(path, &CHAIN_COLUMNS)?;
    let mut quotes = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for (line, r) in rows {
        let dte = (r.expiry_date - r.quote_date).num_days();
        if let Some(reason) = reject_reason(&r, dte) {
            warn!("{}:{line}: dropping row ({reason})", path.display());
            dropped += 1;
            continue;
        }
        quotes.push(OptionQuote {
            quote_date: r.quote_date,
            expiry_date: r.expiry_date,
            dte,
            underlying_last: r.underlying_last,
            strike: r.strike,
            bid: r.bid,
            ask: r.ask,
            last: r.last,
            volume: r.volume,
            implied_vol: r.implied_vol.unwrap_or_default(),
            delta: r.delta,
            gamma: r.gamma,
            vega: r.vega,
            theta: r.theta,
            rho: r.rho,
        });
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} invalid rows", path.display());
    }
    Ok(ChainLoad { quotes, dropped })
}

pub fn write_chain_csv(path: impl AsRef<Path>, quotes: &[OptionQuote]) -> Result<usize> {
    write_rows(
        path.as_ref(),
        quotes.iter().map(|q| ChainRecord {
            quote_date: q.quote_date,
            expiry_date: q.expiry_date,
            underlying_last: q.underlying_last,
            strike: q.strike,
            bid: q.bid,
            ask: q.ask,
            last: q.last,
            volume: q.volume,
            implied_vol: Some(q.implied_vol),
            delta: q.delta,
            gamma: q.gamma,
            vega: q.vega,
            theta: q.theta,
            rho: q.rho,
        }),
    )
}

/// Loads the macro series. Empty fields carry forward from the previous row;
/// an empty field with nothing to carry is a parse error.
pub fn load_macro_csv(path: impl AsRef<Path>) -> Result<Vec<MacroRow>> {
    let path = path.as_ref();
    let mut rows: Vec<(u64, MacroRecord)> = read_rows(path, &MACRO_COLUMNS)?;
    rows.sort_by_key(|(_, r)| r.date);
    let mut out: Vec<MacroRow> = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        let prev = out.last().copied();
        let pick = |v: Option<f64>, from_prev: fn(&MacroRow) -> f64, name: &str| {
            v.or(prev.as_ref().map(from_prev))
                .ok_or_else(|| DataError::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("empty {name} with no earlier value to carry forward"),
                })
        };
        out.push(MacroRow {
            date: r.date,
            vix: pick(r.vix, |m| m.vix, "vix")?,
            put_call_ratio: pick(r.put_call_ratio, |m| m.put_call_ratio, "put_call_ratio")?,
            gdp_growth: pick(r.gdp_growth, |m| m.gdp_growth, "gdp_growth")?,
            inflation_rate: pick(r.inflation_rate, |m| m.inflation_rate, "inflation_rate")?,
            unemployment_rate: pick(
                r.unemployment_rate,
                |m| m.unemployment_rate,
                "unemployment_rate",
            )?,
        });
    }
    Ok(out)
}

pub fn write_macro_csv(path: impl AsRef<Path>, rows: &[MacroRow]) -> Result<usize> {
    write_rows(path.as_ref(), rows)
}

pub fn load_dividends_csv(path: impl AsRef<Path>) -> Result<Vec<DividendRecord>> {
    let rows: Vec<(u64, DividendRecord)> = read_rows(path.as_ref(), &DIVIDEND_COLUMNS)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_dividends_csv(path: impl AsRef<Path>, rows: &[DividendRecord]) -> Result<usize> {
    write_rows(path.as_ref(), rows)
}

pub fn load_rates_csv(path: impl AsRef<Path>) -> Result<Vec<RatePoint>> {
    let rows: Vec<(u64, RatePoint)> = read_rows(path.as_ref(), &RATE_COLUMNS)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_rates_csv(path: impl AsRef<Path>, rows: &[RatePoint]) -> Result<usize> {
    write_rows(path.as_ref(), rows)
}

pub fn load_bars_csv(path: impl AsRef<Path>) -> Result<Vec<UnderlyingBar>> {
    let path = path.as_ref();
    let rows: Vec<(u64, UnderlyingBar)> = read_rows(path, &BAR_COLUMNS)?;
    if let Some((line, _)) = rows.iter().find(|(_, b)| !(b.close > 0.0)) {
        return Err(DataError::Parse {
            path: path.display().to_string(),
            line: *line,
            message: "close must be > 0".into(),
        });
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_bars_csv(path: impl AsRef<Path>, rows: &[UnderlyingBar]) -> Result<usize> {
    write_rows(path.as_ref(), rows)
}

/// Locations of the five raw input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub chain: PathBuf,
    #[serde(rename = "macro")]
    pub macro_series: PathBuf,
    pub dividends: PathBuf,
    pub rates: PathBuf,
    pub underlying: PathBuf,
}

impl DataFiles {
    /// Standard file names inside one directory, as written by the generator.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            chain: dir.join("chain.csv"),
            macro_series: dir.join("macro.csv"),
            dividends: dir.join("dividends.csv"),
            rates: dir.join("rates.csv"),
            underlying: dir.join("underlying.csv"),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [
            &self.chain,
            &self.macro_series,
            &self.dividends,
            &self.rates,
            &self.underlying,
        ]
    }
}

pub fn load_market_dir(files: &DataFiles) -> Result<(ChainLoad, MarketData)> {
    let chain = load_chain_csv(&files.chain)?;
    let market = MarketData::new(
        load_macro_csv(&files.macro_series)?,
        load_dividends_csv(&files.dividends)?,
        &load_rates_csv(&files.rates)?,
        load_bars_csv(&files.underlying)?,
    )?;
    Ok((chain, market))
}

/// Writes all five files and returns their row counts in
/// `[chain, macro, dividends, rates, underlying]` order.
pub fn write_market_dir(
    files: &DataFiles,
    quotes: &[OptionQuote],
    market: &MarketData,
) -> Result<[usize; 5]> {
    Ok([
        write_chain_csv(&files.chain, quotes)?,
        write_macro_csv(&files.macro_series, &market.macro_rows)?,
        write_dividends_csv(&files.dividends, &market.dividends)?,
        write_rates_csv(&files.rates, &market.rate_points())?,
        write_bars_csv(&files.underlying, &market.bars)?,
    ])
}
