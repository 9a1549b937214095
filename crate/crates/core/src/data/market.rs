use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{
    DataError, DividendRecord, MacroRow, MarketContext, RateCurve, RatePoint, Result,
    UnderlyingBar, TRADING_DAYS_PER_YEAR,
};

/// Risk-free proxy for an option: linear interpolation of the Treasury curve
/// in maturity days, flat beyond the first and last knots.
pub fn rate_for_dte(ctx: &MarketContext, dte: i64) -> f64 {
    let knots = ctx.rate_curve.knots();
    let x = dte as f64;
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if x <= first.0 as f64 {
        return first.1;
    }
    if x >= last.0 as f64 {
        return last.1;
    }
    let i = knots.partition_point(|k| (k.0 as f64) <= x);
    let (m0, r0) = knots[i - 1];
    let (m1, r1) = knots[i];
    if x == m0 as f64 {
        return r0;
    }
    let w = (x - m0 as f64) / (m1 as f64 - m0 as f64);
    r0 + w * (r1 - r0)
}

/// Annualized sample standard deviation of daily log returns over the
/// trailing `window` returns ending at `as_of`.
///
/// `bars` must be sorted by date. Needs `window + 1` closes on or before
/// `as_of`.
pub fn realized_vol(bars: &[UnderlyingBar], as_of: NaiveDate, window: usize) -> Result<f64> {
    if window < 2 {
        return Err(DataError::Config(format!("volatility window must be >= 2, got {window}")));
    }
    let available = bars.partition_point(|b| b.date <= as_of);
    let needed = window + 1;
    if available < needed {
        return Err(DataError::InsufficientHistory {
            as_of,
            needed,
            available,
        });
    }
    let closes = &bars[available - needed..available];
    let returns: Vec<f64> = closes
        .windows(2)
        .map(|w| (w[1].close / w[0].close).ln())
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((TRADING_DAYS_PER_YEAR * var).sqrt())
}

/// Put volume over call volume with both floored at one contract, so the
/// ratio is always positive and finite.
pub fn put_call_ratio(put_volume: u64, call_volume: u64) -> f64 {
    put_volume.max(1) as f64 / call_volume.max(1) as f64
}

/// Date-indexed market series from which per-date contexts are assembled.
///
/// Macro rows and rate curves carry forward from the most recent prior date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketData {
    pub macro_rows: Vec<MacroRow>,
    pub dividends: Vec<DividendRecord>,
    pub rate_curves: BTreeMap<NaiveDate, RateCurve>,
    pub bars: Vec<UnderlyingBar>,
}

impl MarketData {
    pub fn new(
        mut macro_rows: Vec<MacroRow>,
        mut dividends: Vec<DividendRecord>,
        rate_points: &[RatePoint],
        mut bars: Vec<UnderlyingBar>,
    ) -> Result<Self> {
        macro_rows.sort_by_key(|r| r.date);
        dividends.sort_by_key(|d| d.ex_div_date);
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(DataError::Config(format!("duplicate bar date {}", w[0].date)));
        }
        let mut grouped: BTreeMap<NaiveDate, Vec<(u32, f64)>> = BTreeMap::new();
        for p in rate_points {
            grouped
                .entry(p.date)
                .or_default()
                .push((p.maturity_days, p.rate));
        }
        let rate_curves = grouped
            .into_iter()
            .map(|(d, knots)| RateCurve::new(knots).map(|c| (d, c)))
            .collect::<Result<_>>()?;
        Ok(Self {
            macro_rows,
            dividends,
            rate_curves,
            bars,
        })
    }

    pub fn rate_points(&self) -> Vec<RatePoint> {
        self.rate_curves
            .iter()
            .flat_map(|(date, curve)| {
                curve.knots().iter().map(|&(maturity_days, rate)| RatePoint {
                    date: *date,
                    maturity_days,
                    rate,
                })
            })
            .collect()
    }

    pub fn context_for(&self, date: NaiveDate) -> Result<MarketContext> {
        let i = self.macro_rows.partition_point(|r| r.date <= date);
        let m = i
            .checked_sub(1)
            .map(|i| self.macro_rows[i])
            .ok_or(DataError::MissingMarketData { what: "macro row", date })?;
        let curve = self
            .rate_curves
            .range(..=date)
            .next_back()
            .map(|(_, c)| c.clone())
            .ok_or(DataError::MissingMarketData { what: "rate curve", date })?;

        // yield of the latest ex-date on or before `date`, else the first scheduled one
        let j = self.dividends.partition_point(|d| d.ex_div_date <= date);
        let dividend_yield = match j {
            0 => self.dividends.first().map_or(0.0, |d| d.dividend_yield),
            j => self.dividends[j - 1].dividend_yield,
        };
        let next_ex_div_date = self.dividends.get(j).map(|d| d.ex_div_date);

        Ok(MarketContext {
            date,
            vix: m.vix,
            put_call_ratio: m.put_call_ratio,
            gdp_growth: m.gdp_growth,
            inflation_rate: m.inflation_rate,
            unemployment_rate: m.unemployment_rate,
            dividend_yield,
            next_ex_div_date,
            rate_curve: curve,
        })
    }
}
