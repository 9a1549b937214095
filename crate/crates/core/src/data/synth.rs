//! Seeded synthetic option chains for a single dividend-paying underlying.
//!
//! Each trading day emits one call quote per (strike ratio, DTE). The label
//! is the 100-step American CRR price scaled by a sentiment premium driven by
//! standardized VIX and put-call-ratio deviations, so part of the price is
//! visible only through market features the lattice pricers never see.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    rate_for_dte, DataError, DividendRecord, MacroRow, MarketContext, MarketData, OptionQuote,
    RatePoint, Result, UnderlyingBar, TRADING_DAYS_PER_YEAR,
};
use crate::pricing::{
    bs_greeks, crr_binomial_call, tau_from_dte, ExerciseStyle, PricingInputs, BOP_STEPS,
};

/// Treasury maturities (days) emitted on every curve.
const CURVE_MATURITIES: [u32; 4] = [30, 90, 180, 365];

// independent RNG streams so that changing one block of the config leaves
// the draws of the others untouched
const STREAM_SPOT: u64 = 1;
const STREAM_MACRO: u64 = 2;
const STREAM_RATES: u64 = 3;
const STREAM_DIVIDENDS: u64 = 4;
const STREAM_QUOTES: u64 = 5;
const STREAM_ECONOMY: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Trading days that emit quotes.
    pub trading_days: usize,
    /// Extra bars simulated before the first quote day so trailing
    /// volatility windows are populated from day one.
    pub warmup_days: usize,
    /// First quote day; rolled forward to a weekday if needed.
    pub start_date: NaiveDate,
    pub spot0: f64,
    /// Annual GBM drift.
    pub drift: f64,
    /// Base annual volatility at the long-run VIX level.
    pub vol: f64,
    /// Strikes as fractions of the running spot.
    pub strike_ratios: Vec<f64>,
    /// Strikes are rounded to this tick; 0 disables rounding.
    pub strike_tick: f64,
    pub dte_set: Vec<u32>,
    /// Long-run continuous dividend yield.
    pub dividend_yield: f64,
    pub ex_div_interval_days: u32,
    pub vix_level: f64,
    pub vix_persistence: f64,
    pub vix_shock: f64,
    pub pcr_level: f64,
    pub pcr_persistence: f64,
    pub pcr_shock: f64,
    pub gdp_growth: f64,
    pub inflation_rate: f64,
    pub unemployment_rate: f64,
    /// Short end of the Treasury curve.
    pub rate_level: f64,
    /// Added per year of maturity along the curve.
    pub rate_slope: f64,
    /// Premium loading on the standardized VIX deviation.
    pub premium_vix: f64,
    /// Premium loading on the standardized put-call-ratio deviation.
    pub premium_pcr: f64,
    /// Standard deviation of the idiosyncratic premium term.
    pub noise_scale: f64,
    /// Median daily contract volume.
    pub volume_median: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            trading_days: 250,
            warmup_days: 40,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 3).expect("valid date"),
            spot0: 150.0,
            drift: 0.06,
            vol: 0.25,
            strike_ratios: (0..9).map(|i| 0.80 + 0.05 * i as f64).collect(),
            strike_tick: 0.5,
            dte_set: vec![7, 30, 60, 90, 180],
            dividend_yield: 0.005,
            ex_div_interval_days: 91,
            vix_level: 17.0,
            vix_persistence: 0.97,
            vix_shock: 0.8,
            pcr_level: 0.9,
            pcr_persistence: 0.9,
            pcr_shock: 0.08,
            gdp_growth: 0.025,
            inflation_rate: 0.04,
            unemployment_rate: 0.036,
            rate_level: 0.052,
            rate_slope: -0.004,
            premium_vix: 0.08,
            premium_pcr: 0.02,
            noise_scale: 0.01,
            volume_median: 400.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DataError::Config(msg));
        if self.trading_days == 0 {
            return bad("trading_days must be >= 1".into());
        }
        for (name, v) in [
            ("spot0", self.spot0),
            ("vol", self.vol),
            ("vix_level", self.vix_level),
            ("pcr_level", self.pcr_level),
            ("volume_median", self.volume_median),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        for (name, v) in [
            ("dividend_yield", self.dividend_yield),
            ("noise_scale", self.noise_scale),
            ("strike_tick", self.strike_tick),
            ("vix_shock", self.vix_shock),
            ("pcr_shock", self.pcr_shock),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("drift", self.drift),
            ("gdp_growth", self.gdp_growth),
            ("inflation_rate", self.inflation_rate),
            ("unemployment_rate", self.unemployment_rate),
            ("rate_level", self.rate_level),
            ("rate_slope", self.rate_slope),
            ("premium_vix", self.premium_vix),
            ("premium_pcr", self.premium_pcr),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("vix_persistence", self.vix_persistence),
            ("pcr_persistence", self.pcr_persistence),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1), got {v}"));
            }
        }
        if self.strike_ratios.is_empty() || self.strike_ratios.iter().any(|r| !(*r > 0.0)) {
            return bad("strike_ratios must be non-empty and positive".into());
        }
        if self.dte_set.is_empty() || self.dte_set.contains(&0) {
            return bad("dte_set must be non-empty with every DTE >= 1".into());
        }
        if self.ex_div_interval_days == 0 {
            return bad("ex_div_interval_days must be >= 1".into());
        }
        Ok(())
    }

    pub fn quotes_per_day(&self) -> usize {
        self.strike_ratios.len() * self.dte_set.len()
    }
}

/// Generated chains plus the market series they were priced against.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub quotes: Vec<OptionQuote>,
    /// One context per quote day, in date order.
    pub contexts: Vec<MarketContext>,
    pub market: MarketData,
}

impl SyntheticDataset {
    pub fn bars(&self) -> &[UnderlyingBar] {
        &self.market.bars
    }
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = d + Days::new(1);
    }
    d
}

/// `warmup` weekdays strictly before `start`, then `days` weekdays from it.
fn calendar(start: NaiveDate, warmup: usize, days: usize) -> Vec<NaiveDate> {
    let start = next_weekday(start);
    let mut before = Vec::with_capacity(warmup);
    let mut d = start;
    while before.len() < warmup {
        d = d - Days::new(1);
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            before.push(d);
        }
    }
    before.reverse();
    let mut out = before;
    let mut d = start;
    for _ in 0..days {
        out.push(d);
        d = next_weekday(d + Days::new(1));
    }
    out
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    xs.iter()
        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
        .collect()
}

/// Splits `mid` into a bid/ask pair whose midpoint is bitwise `mid`.
///
/// `ask >= mid` is a multiple of ulp(mid), so `2 mid - ask` is exact and the
/// pair sums to exactly `2 mid`.
fn quote_spread(mid: f64) -> (f64, f64) {
    let h = (0.005 * mid).max(0.01).min(mid);
    let ask = mid + h;
    let bid = 2.0 * mid - ask;
    (bid, ask)
}

fn round_to_tick(x: f64, tick: f64) -> f64 {
    if tick > 0.0 {
        ((x / tick).round() * tick).max(tick)
    } else {
        x
    }
}

struct Series {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
    vols: Vec<f64>,
    vix: Vec<f64>,
    pcr: Vec<f64>,
}

fn simulate_series(cfg: &SynthConfig, seed: u64) -> Series {
    let dates = calendar(cfg.start_date, cfg.warmup_days, cfg.trading_days);
    let n = dates.len();

    let mut rng = stream(seed, STREAM_MACRO);
    let mut vix = Vec::with_capacity(n);
    let mut pcr = Vec::with_capacity(n);
    let mut v = cfg.vix_level;
    let mut lp = cfg.pcr_level.ln();
    for _ in 0..n {
        v = cfg.vix_level + cfg.vix_persistence * (v - cfg.vix_level) + cfg.vix_shock * normal(&mut rng);
        v = v.max(0.5 * cfg.vix_level);
        lp = cfg.pcr_level.ln()
            + cfg.pcr_persistence * (lp - cfg.pcr_level.ln())
            + cfg.pcr_shock * normal(&mut rng);
        vix.push(v);
        pcr.push(lp.exp());
    }

    // volatility co-moves with the fear index
    let vols: Vec<f64> = vix.iter().map(|v| cfg.vol * v / cfg.vix_level).collect();

    let mut rng = stream(seed, STREAM_SPOT);
    let dt = 1.0 / TRADING_DAYS_PER_YEAR;
    let mut closes = Vec::with_capacity(n);
    let mut s = cfg.spot0;
    for (i, sigma) in vols.iter().enumerate() {
        if i > 0 {
            let z = normal(&mut rng);
            s *= ((cfg.drift - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
        }
        closes.push(s);
    }
    Series {
        dates,
        closes,
        vols,
        vix,
        pcr,
    }
}

fn macro_rows(cfg: &SynthConfig, seed: u64, s: &Series) -> Vec<MacroRow> {
    // slow mean-reverting walks around the configured levels
    let mut rng = stream(seed, STREAM_ECONOMY);
    let (mut g, mut inf, mut u) = (cfg.gdp_growth, cfg.inflation_rate, cfg.unemployment_rate);
    s.dates
        .iter()
        .enumerate()
        .map(|(i, &date)| {
            g = cfg.gdp_growth + 0.995 * (g - cfg.gdp_growth) + 0.0005 * normal(&mut rng);
            inf = cfg.inflation_rate + 0.995 * (inf - cfg.inflation_rate) + 0.0004 * normal(&mut rng);
            u = cfg.unemployment_rate
                + 0.995 * (u - cfg.unemployment_rate)
                + 0.0002 * normal(&mut rng);
            MacroRow {
                date,
                vix: s.vix[i],
                put_call_ratio: s.pcr[i],
                gdp_growth: g,
                inflation_rate: inf,
                unemployment_rate: u.max(0.0),
            }
        })
        .collect()
}

fn rate_points(cfg: &SynthConfig, seed: u64, dates: &[NaiveDate]) -> Vec<RatePoint> {
    let mut rng = stream(seed, STREAM_RATES);
    let mut shift = 0.0;
    dates
        .iter()
        .flat_map(|&date| {
            shift = 0.99 * shift + 0.0003 * normal(&mut rng);
            let level = cfg.rate_level + shift;
            CURVE_MATURITIES.map(|m| RatePoint {
                date,
                maturity_days: m,
                rate: level + cfg.rate_slope * m as f64 / 365.0,
            })
        })
        .collect()
}

fn dividend_schedule(cfg: &SynthConfig, seed: u64, first: NaiveDate, last: NaiveDate) -> Vec<DividendRecord> {
    let mut rng = stream(seed, STREAM_DIVIDENDS);
    let interval = Days::new(cfg.ex_div_interval_days as u64);
    let max_dte = cfg.dte_set.iter().copied().max().unwrap_or(0) as u64;
    let horizon = last + Days::new(max_dte) + interval;
    // phase the first ex-date so one falls before the first quote day
    let offset = rng.random_range(0..cfg.ex_div_interval_days) as u64;
    let mut d = first - interval + Days::new(offset);
    let mut out = Vec::new();
    while d <= horizon {
        let y = cfg.dividend_yield * (0.1 * normal(&mut rng)).exp();
        out.push(DividendRecord {
            ex_div_date: d,
            dividend_yield: y,
        });
        d = d + interval;
    }
    out
}

/// Generates a full synthetic dataset. A pure function of `(cfg, seed)`.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, seed: u64) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let s = simulate_series(cfg, seed);
    let w = cfg.warmup_days;
    let quote_dates = &s.dates[w..];

    let bars: Vec<UnderlyingBar> = s
        .dates
        .iter()
        .zip(&s.closes)
        .map(|(&date, &close)| UnderlyingBar { date, close })
        .collect();
    let dividends = dividend_schedule(cfg, seed, quote_dates[0], quote_dates[quote_dates.len() - 1]);
    let market = MarketData::new(
        macro_rows(cfg, seed, &s),
        dividends,
        &rate_points(cfg, seed, &s.dates),
        bars,
    )?;

    let z_vix = standardize(&s.vix[w..]);
    let z_pcr = standardize(&s.pcr[w..]);

    let mut rng = stream(seed, STREAM_QUOTES);
    let mut quotes = Vec::with_capacity(quote_dates.len() * cfg.quotes_per_day());
    let mut contexts = Vec::with_capacity(quote_dates.len());
    for (day, &date) in quote_dates.iter().enumerate() {
        let ctx = market.context_for(date)?;
        let spot = s.closes[w + day];
        let sigma = s.vols[w + day];
        for &ratio in &cfg.strike_ratios {
            let strike = round_to_tick(spot * ratio, cfg.strike_tick);
            for &dte in &cfg.dte_set {
                let inp = PricingInputs::new(
                    spot,
                    strike,
                    rate_for_dte(&ctx, dte as i64),
                    ctx.dividend_yield,
                    sigma,
                    tau_from_dte(dte as f64),
                );
                let lattice = crr_binomial_call(&inp, BOP_STEPS, ExerciseStyle::American)?;
                let eps = cfg.noise_scale * normal(&mut rng);
                let premium = cfg.premium_vix * z_vix[day] + cfg.premium_pcr * z_pcr[day] + eps;
                let mid = (lattice * (1.0 + premium)).max(0.0);
                let (bid, ask) = quote_spread(mid);
                let g = bs_greeks(&inp)?;
                let moneyness_damp = (-4.0 * (ratio - 1.0).abs()).exp();
                let volume = (cfg.volume_median * moneyness_damp * (0.8 * normal(&mut rng)).exp())
                    .round() as u64;
                quotes.push(OptionQuote {
                    quote_date: date,
                    expiry_date: date + Days::new(dte as u64),
                    dte: dte as i64,
                    underlying_last: spot,
                    strike,
                    bid,
                    ask,
                    last: mid,
                    volume,
                    implied_vol: sigma,
                    delta: g.delta,
                    gamma: g.gamma,
                    vega: g.vega,
                    theta: g.theta,
                    rho: g.rho,
                });
            }
        }
        contexts.push(ctx);
    }
    Ok(SyntheticDataset {
        quotes,
        contexts,
        market,
    })
}
