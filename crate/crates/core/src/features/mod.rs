//! Engineered feature columns, their six-module partition, min-max scaling
//! and the chronological train/validation/test split.
//!
//! The six module column lists hold 46 slots but only 40 distinct columns:
//! theta, gamma, delta, pcr, log_pcr and vix each feed two modules. A
//! [`FeatureRow`] stores each distinct column once; [`Module::columns`] and
//! [`mnn_input_columns`] expand to the per-module slot layout.

mod io;
mod scaler;
mod split;

pub use io::{load_features_csv, write_features_csv};
pub use scaler::ScalerParams;
pub use split::{chronological_split, Split, DEFAULT_TRAIN_FRAC, DEFAULT_VAL_FRAC_OF_TRAIN};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    rate_for_dte, realized_vol, DataError, MarketContext, MarketData, OptionQuote,
    HIST_VOL_WINDOW, REALIZED_VOL_WINDOW,
};

/// Floor on the bid/ask spread in the volume-over-spread ratio.
pub const SPREAD_FLOOR: f64 = 0.01;
/// Magnitude floor on GDP growth in the unemployment-over-GDP ratio.
pub const GDP_FLOOR: f64 = 0.001;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature guard violated: {column} = {value}")]
    Guard { column: &'static str, value: f64 },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least {needed} distinct quote dates, got {got}")]
    TooFewDistinctDates { needed: usize, got: usize },
    #[error("invalid split fractions: {0}")]
    Fractions(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: missing required columns: {}", missing.join(", "))]
    Schema { path: String, missing: Vec<String> },
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("scaler json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

macro_rules! features {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// One distinct engineered column.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Feature {
            $($variant),+
        }

        impl Feature {
            pub const ALL: [Feature; 40] = [$(Feature::$variant),+];

            pub const fn name(self) -> &'static str {
                match self {
                    $(Feature::$variant => $name),+
                }
            }
        }
    };
}

features! {
    UnderlyingLast => "underlying_last",
    Strike => "strike",
    Intrinsic => "intrinsic",
    Moneyness => "moneyness",
    LogMoneyness => "log_moneyness",
    MoneynessXStrikeDist => "moneyness_x_strike_dist",
    Dte => "dte",
    ImpliedVol => "implied_vol",
    HistVol => "hist_vol",
    RealizedVol20 => "realized_vol_20",
    Theta => "theta",
    Gamma => "gamma",
    LogDte => "log_dte",
    DteXIv => "dte_x_iv",
    GammaOverDte => "gamma_over_dte",
    DividendYield => "dividend_yield",
    DaysToExDiv => "days_to_ex_div",
    Rate => "rate",
    Delta => "delta",
    ExdivOverDte => "exdiv_over_dte",
    DeltaXDivyield => "delta_x_divyield",
    Volume => "volume",
    Spread => "spread",
    Pcr => "pcr",
    LogPcr => "log_pcr",
    Vix => "vix",
    VolumeOverSpread => "volume_over_spread",
    VixXIv => "vix_x_iv",
    PcrOverVix => "pcr_over_vix",
    GdpGrowth => "gdp_growth",
    InflationRate => "inflation_rate",
    UnemploymentRate => "unemployment_rate",
    GdpXInflation => "gdp_x_inflation",
    UnempOverGdp => "unemp_over_gdp",
    VixXPcr => "vix_x_pcr",
    Vega => "vega",
    Rho => "rho",
    DeltaXVega => "delta_x_vega",
    GammaXTheta => "gamma_x_theta",
    RhoXRate => "rho_x_rate",
}

impl Feature {
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| FeatureError::UnknownColumn(s.to_string()))
    }
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The six feature modules, in network branch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Intrinsic,
    Timevol,
    Dividend,
    Liquidity,
    Macro,
    Greeks,
}

impl Module {
    pub const ALL: [Module; 6] = [
        Module::Intrinsic,
        Module::Timevol,
        Module::Dividend,
        Module::Liquidity,
        Module::Macro,
        Module::Greeks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Module::Intrinsic => "intrinsic",
            Module::Timevol => "timevol",
            Module::Dividend => "dividend",
            Module::Liquidity => "liquidity",
            Module::Macro => "macro",
            Module::Greeks => "greeks",
        }
    }

    pub fn columns(self) -> &'static [Feature] {
        use Feature::*;
        match self {
            Module::Intrinsic => &[
                UnderlyingLast,
                Strike,
                Intrinsic,
                Moneyness,
                LogMoneyness,
                MoneynessXStrikeDist,
            ],
            Module::Timevol => &[
                Dte,
                ImpliedVol,
                HistVol,
                RealizedVol20,
                Theta,
                Gamma,
                LogDte,
                DteXIv,
                GammaOverDte,
            ],
            Module::Dividend => &[
                DividendYield,
                DaysToExDiv,
                Rate,
                Delta,
                ExdivOverDte,
                DeltaXDivyield,
            ],
            Module::Liquidity => &[
                Volume,
                Spread,
                Pcr,
                LogPcr,
                Vix,
                VolumeOverSpread,
                VixXIv,
                PcrOverVix,
            ],
            Module::Macro => &[
                GdpGrowth,
                InflationRate,
                UnemploymentRate,
                Pcr,
                LogPcr,
                Vix,
                GdpXInflation,
                UnempOverGdp,
                VixXPcr,
            ],
            Module::Greeks => &[Delta, Gamma, Vega, Theta, Rho, DeltaXVega, GammaXTheta, RhoXRate],
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Module {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self> {
        Module::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| FeatureError::UnknownColumn(s.to_string()))
    }
}

/// All 46 module slots, concatenated in branch order.
pub fn mnn_input_columns() -> Vec<Feature> {
    Module::ALL.iter().flat_map(|m| m.columns().iter().copied()).collect()
}

/// Inputs of the benchmark feed-forward network.
pub const FNN_COLUMNS: [Feature; 9] = [
    Feature::UnderlyingLast,
    Feature::Strike,
    Feature::Dte,
    Feature::ImpliedVol,
    Feature::Delta,
    Feature::Gamma,
    Feature::Vega,
    Feature::Theta,
    Feature::Rho,
];

/// Engineered values for one quote plus its regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub quote_date: NaiveDate,
    pub values: [f64; Feature::COUNT],
    /// Option mid price.
    pub target: f64,
}

impl FeatureRow {
    pub fn get(&self, f: Feature) -> f64 {
        self.values[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.values[f.index()] = v;
    }

    /// Values for `columns` in order; a column may repeat.
    pub fn gather(&self, columns: &[Feature]) -> Vec<f64> {
        columns.iter().map(|&c| self.get(c)).collect()
    }
}

/// `rows × columns` matrix of raw (unscaled) values.
pub fn design_matrix(rows: &[FeatureRow], columns: &[Feature]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), columns.len()), |(i, j)| rows[i].get(columns[j]))
}

pub fn targets(rows: &[FeatureRow]) -> Array1<f64> {
    rows.iter().map(|r| r.target).collect()
}

fn guard(column: &'static str, value: f64, ok: bool) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(FeatureError::Guard { column, value })
    }
}

/// Computes every feature for one quote.
///
/// `hist_vol` and `realized_vol20` are the trailing volatilities on the
/// quote date, `rate` the Treasury rate matched to the quote's DTE.
pub fn engineer_features(
    q: &OptionQuote,
    ctx: &MarketContext,
    hist_vol: f64,
    realized_vol20: f64,
    rate: f64,
) -> Result<FeatureRow> {
    use Feature::*;
    guard("dte", q.dte as f64, q.dte >= 1)?;
    guard("underlying_last", q.underlying_last, q.underlying_last > 0.0)?;
    guard("strike", q.strike, q.strike > 0.0)?;
    guard("implied_vol", q.implied_vol, q.implied_vol > 0.0)?;
    guard("vix", ctx.vix, ctx.vix > 0.0)?;
    guard("pcr", ctx.put_call_ratio, ctx.put_call_ratio > 0.0)?;
    guard("dividend_yield", ctx.dividend_yield, ctx.dividend_yield >= 0.0)?;
    guard("spread", q.ask - q.bid, q.ask >= q.bid)?;
    guard("hist_vol", hist_vol, hist_vol >= 0.0)?;
    guard("realized_vol_20", realized_vol20, realized_vol20 >= 0.0)?;
    guard("rate", rate, true)?;

    let s = q.underlying_last;
    let k = q.strike;
    let dte = q.dte as f64;
    let moneyness = s / k;

    // a dividend only matters if one goes ex before expiry
    let days_to_ex_div = match ctx.next_ex_div_date {
        Some(ex) if ctx.dividend_yield > 0.0 && ex <= q.expiry_date => {
            (ex - q.quote_date).num_days() as f64
        }
        _ => dte,
    };
    let spread = q.ask - q.bid;
    let pcr = ctx.put_call_ratio;
    let g = ctx.gdp_growth;
    let gdp_denominator = if g < 0.0 { -(g.abs().max(GDP_FLOOR)) } else { g.max(GDP_FLOOR) };

    let mut row = FeatureRow {
        quote_date: q.quote_date,
        values: [0.0; Feature::COUNT],
        target: q.mid_price(),
    };
    let mut put = |f: Feature, v: f64| row.set(f, v);
    put(UnderlyingLast, s);
    put(Strike, k);
    put(Intrinsic, (s - k).max(0.0));
    put(Moneyness, moneyness);
    put(LogMoneyness, moneyness.ln());
    put(MoneynessXStrikeDist, moneyness * (s - k).abs());
    put(Dte, dte);
    put(ImpliedVol, q.implied_vol);
    put(HistVol, hist_vol);
    put(RealizedVol20, realized_vol20);
    put(Theta, q.theta);
    put(Gamma, q.gamma);
    put(LogDte, dte.ln());
    put(DteXIv, dte * q.implied_vol);
    put(GammaOverDte, q.gamma / dte);
    put(DividendYield, ctx.dividend_yield);
    put(DaysToExDiv, days_to_ex_div);
    put(Rate, rate);
    put(Delta, q.delta);
    put(ExdivOverDte, (days_to_ex_div / dte).min(1.0));
    put(DeltaXDivyield, q.delta * ctx.dividend_yield);
    put(Volume, q.volume as f64);
    put(Spread, spread);
    put(Pcr, pcr);
    put(LogPcr, pcr.ln());
    put(Vix, ctx.vix);
    put(VolumeOverSpread, q.volume as f64 / spread.max(SPREAD_FLOOR));
    put(VixXIv, ctx.vix * q.implied_vol);
    put(PcrOverVix, pcr / ctx.vix);
    put(GdpGrowth, g);
    put(InflationRate, ctx.inflation_rate);
    put(UnemploymentRate, ctx.unemployment_rate);
    put(GdpXInflation, g * ctx.inflation_rate);
    put(UnempOverGdp, ctx.unemployment_rate / gdp_denominator);
    put(VixXPcr, ctx.vix * pcr);
    put(Vega, q.vega);
    put(Rho, q.rho);
    put(DeltaXVega, q.delta * q.vega);
    put(GammaXTheta, q.gamma * q.theta);
    put(RhoXRate, q.rho * rate);

    for f in Feature::ALL {
        guard(f.name(), row.get(f), true)?;
    }
    guard("target", row.target, row.target >= 0.0)?;
    Ok(row)
}

/// Rows produced from a chain, with the number of quotes skipped because
/// their date lacked market context or enough price history.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredSet {
    pub rows: Vec<FeatureRow>,
    pub skipped: usize,
}

struct DayInputs {
    ctx: MarketContext,
    hist_vol: f64,
    realized_vol20: f64,
}

fn day_inputs(market: &MarketData, date: NaiveDate) -> std::result::Result<DayInputs, DataError> {
    Ok(DayInputs {
        ctx: market.context_for(date)?,
        hist_vol: realized_vol(&market.bars, date, HIST_VOL_WINDOW)?,
        realized_vol20: realized_vol(&market.bars, date, REALIZED_VOL_WINDOW)?,
    })
}

/// Engineers every quote against `market`, preserving quote order.
///
/// Dates without enough history or market data are skipped with a warning;
/// a guard violation on an individual quote is an error.
pub fn engineer_dataset(quotes: &[OptionQuote], market: &MarketData) -> Result<EngineeredSet> {
    let mut days: HashMap<NaiveDate, Option<DayInputs>> = HashMap::new();
    let mut rows = Vec::with_capacity(quotes.len());
    let mut skipped = 0;
    for q in quotes {
        let day = days.entry(q.quote_date).or_insert_with(|| match day_inputs(market, q.quote_date) {
            Ok(d) => Some(d),
            Err(e) => {
                warn!("skipping quotes on {}: {e}", q.quote_date);
                None
            }
        });
        let Some(day) = day else {
            skipped += 1;
            continue;
        };
        let rate = rate_for_dte(&day.ctx, q.dte);
        rows.push(engineer_features(q, &day.ctx, day.hist_vol, day.realized_vol20, rate)?);
    }
    Ok(EngineeredSet { rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RateCurve;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn quote(s: f64, k: f64, dte: i64) -> OptionQuote {
        OptionQuote {
            quote_date: d("2023-03-01"),
            expiry_date: d("2023-03-01") + chrono::Days::new(dte as u64),
            dte,
            underlying_last: s,
            strike: k,
            bid: 4.9,
            ask: 5.1,
            last: 5.0,
            volume: 120,
            implied_vol: 0.3,
            delta: 0.6,
            gamma: 0.02,
            vega: 0.15,
            theta: -0.05,
            rho: 0.08,
        }
    }

    fn ctx() -> MarketContext {
        MarketContext {
            date: d("2023-03-01"),
            vix: 20.0,
            put_call_ratio: 0.8,
            gdp_growth: 0.02,
            inflation_rate: 0.05,
            unemployment_rate: 0.04,
            dividend_yield: 0.01,
            next_ex_div_date: Some(d("2023-03-21")),
            rate_curve: RateCurve::new(vec![(30, 0.05)]).unwrap(),
        }
    }

    #[test]
    fn partition_sizes() {
        let sizes: Vec<usize> = Module::ALL.iter().map(|m| m.columns().len()).collect();
        assert_eq!(sizes, [6, 9, 6, 8, 9, 8]);
        assert_eq!(mnn_input_columns().len(), 46);
        let mut distinct = mnn_input_columns();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), Feature::COUNT);
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(f.name().parse::<Feature>().unwrap(), *f);
        }
    }

    #[test]
    fn moneyness_block() {
        let r = engineer_features(&quote(110.0, 100.0, 30), &ctx(), 0.2, 0.2, 0.05).unwrap();
        assert!((r.get(Feature::Moneyness) - 1.1).abs() < 1e-15);
        assert!((r.get(Feature::LogMoneyness) - 0.09531017980432493).abs() < 1e-12);
        assert_eq!(r.get(Feature::Intrinsic), 10.0);
        assert!((r.get(Feature::MoneynessXStrikeDist) - 11.0).abs() < 1e-12);

        let r = engineer_features(&quote(100.0, 100.0, 30), &ctx(), 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::Intrinsic), 0.0);
        assert_eq!(r.get(Feature::LogMoneyness), 0.0);
        assert_eq!(r.get(Feature::MoneynessXStrikeDist), 0.0);
    }

    #[test]
    fn exdiv_ratio_caps_when_dividend_after_expiry() {
        let mut c = ctx();
        c.next_ex_div_date = Some(d("2023-03-01") + chrono::Days::new(200));
        let r = engineer_features(&quote(100.0, 100.0, 50), &c, 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::ExdivOverDte), 1.0);
        assert_eq!(r.get(Feature::DaysToExDiv), 50.0);

        let r = engineer_features(&quote(100.0, 100.0, 50), &ctx(), 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::DaysToExDiv), 20.0);
        assert_eq!(r.get(Feature::ExdivOverDte), 0.4);
    }

    #[test]
    fn zero_yield_means_dividend_irrelevant() {
        let mut c = ctx();
        c.dividend_yield = 0.0;
        let r = engineer_features(&quote(100.0, 100.0, 50), &c, 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::DeltaXDivyield), 0.0);
        assert_eq!(r.get(Feature::ExdivOverDte), 1.0);
    }

    #[test]
    fn ratio_floors() {
        let mut q = quote(100.0, 100.0, 1);
        q.bid = 5.0;
        q.ask = 5.0;
        let mut c = ctx();
        c.gdp_growth = 0.0;
        let r = engineer_features(&q, &c, 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::VolumeOverSpread), 120.0 / 0.01);
        assert_eq!(r.get(Feature::UnempOverGdp), 0.04 / 0.001);
        c.gdp_growth = -0.0002;
        let r = engineer_features(&q, &c, 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::UnempOverGdp), -0.04 / 0.001);
        c.gdp_growth = -0.02;
        let r = engineer_features(&q, &c, 0.2, 0.2, 0.05).unwrap();
        assert_eq!(r.get(Feature::UnempOverGdp), 0.04 / -0.02);
    }

    #[test]
    fn guard_names_offending_column() {
        let mut c = ctx();
        c.vix = 0.0;
        match engineer_features(&quote(100.0, 100.0, 30), &c, 0.2, 0.2, 0.05) {
            Err(FeatureError::Guard { column, .. }) => assert_eq!(column, "vix"),
            other => panic!("{other:?}"),
        }
        match engineer_features(&quote(100.0, 100.0, 0), &ctx(), 0.2, 0.2, 0.05) {
            Err(FeatureError::Guard { column, .. }) => assert_eq!(column, "dte"),
            other => panic!("{other:?}"),
        }
        let mut q = quote(100.0, 100.0, 30);
        q.gamma = f64::NAN;
        match engineer_features(&q, &ctx(), 0.2, 0.2, 0.05) {
            Err(FeatureError::Guard { column, .. }) => assert_eq!(column, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_skips_dates_without_history() {
        let ds = crate::data::generate_synthetic_dataset(
            &crate::data::SynthConfig {
                trading_days: 5,
                warmup_days: 25,
                ..Default::default()
            },
            11,
        )
        .unwrap();
        // 25 warmup bars: the 30-day window needs 31 closes, first quote day has 26
        let set = engineer_dataset(&ds.quotes, &ds.market).unwrap();
        assert_eq!(set.rows.len() + set.skipped, ds.quotes.len());
        assert_eq!(set.skipped, 5 * 45);

        let ds = crate::data::generate_synthetic_dataset(
            &crate::data::SynthConfig {
                trading_days: 5,
                ..Default::default()
            },
            11,
        )
        .unwrap();
        let set = engineer_dataset(&ds.quotes, &ds.market).unwrap();
        assert_eq!(set.skipped, 0);
        assert_eq!(set.rows[0].target, ds.quotes[0].mid_price());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn degenerate_inputs_stay_finite(
            s in 0.01f64..5000.0,
            k in 0.01f64..5000.0,
            dte in 1i64..1000,
            bid in 0.0f64..100.0,
            spread in prop_oneof![Just(0.0), 0.0f64..5.0],
            volume in prop_oneof![Just(0u64), 0u64..1_000_000],
            iv in 1e-4f64..5.0,
            greeks in proptest::array::uniform5(-1e3f64..1e3),
            pcr in prop_oneof![Just(1.0 / 1e6), Just(1.0), Just(1e6), 1e-6f64..1e6],
            vix in 0.01f64..200.0,
            gdp in prop_oneof![Just(0.0), Just(-0.0), -0.2f64..0.2],
            q in prop_oneof![Just(0.0), 0.0f64..0.2],
            ex in proptest::option::of(1u64..400),
            vols in (0.0f64..3.0, 0.0f64..3.0),
            rate in -0.05f64..0.2,
        ) {
            let mut quote = quote(s, k, dte);
            quote.bid = bid;
            quote.ask = bid + spread;
            quote.last = bid;
            quote.volume = volume;
            quote.implied_vol = iv;
            quote.delta = greeks[0];
            quote.gamma = greeks[1];
            quote.vega = greeks[2];
            quote.theta = greeks[3];
            quote.rho = greeks[4];
            let mut c = ctx();
            c.put_call_ratio = pcr;
            c.vix = vix;
            c.gdp_growth = gdp;
            c.dividend_yield = q;
            c.next_ex_div_date = ex.map(|e| quote.quote_date + chrono::Days::new(e));
            let row = engineer_features(&quote, &c, vols.0, vols.1, rate).unwrap();
            prop_assert!(row.values.iter().all(|v| v.is_finite()));
            prop_assert!(row.get(Feature::ExdivOverDte) <= 1.0);
        }
    }
}
