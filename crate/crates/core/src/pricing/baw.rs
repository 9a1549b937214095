//! Barone-Adesi-Whaley quadratic approximation for American calls.
//!
//! Below the critical spot `S*` the value is the European price plus the
//! early exercise premium `A2 * (S / S*)^q2`; at or above `S*` the call is
//! exercised and worth `S - K`. `S*` solves
//!
//! ```text
//! S* - K = c(S*) + (1 - e^{-q tau} N(d1(S*))) S* / q2
//! ```
//!
//! by the original 1987 Newton scheme, seeded from the perpetual boundary.

use super::black_scholes::bs_call_price;
use super::normal::{norm_cdf, norm_pdf};
use super::{PricingError, PricingInputs, Result};

const NEWTON_MAX_ITER: usize = 100;
const BISECT_MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-8;

struct Quadratic {
    q2: f64,
    /// `q2` for an infinite horizon, used to seed Newton.
    q2_inf: f64,
}

fn quadratic_roots(inp: &PricingInputs) -> Quadratic {
    let v2 = inp.vol * inp.vol;
    let m = 2.0 * inp.rate / v2;
    let n = 2.0 * (inp.rate - inp.div_yield) / v2;
    let k = 1.0 - (-inp.rate * inp.tau).exp();
    // M / K tends to 2 / (vol^2 tau) as r -> 0
    let m_over_k = if inp.rate.abs() < 1e-12 {
        2.0 / (v2 * inp.tau)
    } else {
        m / k
    };
    let nm1 = n - 1.0;
    Quadratic {
        q2: 0.5 * (-nm1 + (nm1 * nm1 + 4.0 * m_over_k).sqrt()),
        q2_inf: 0.5 * (-nm1 + (nm1 * nm1 + 4.0 * m).sqrt()),
    }
}

fn d1_at(inp: &PricingInputs, spot: f64) -> f64 {
    ((spot / inp.strike).ln() + (inp.rate - inp.div_yield + 0.5 * inp.vol * inp.vol) * inp.tau)
        / (inp.vol * inp.tau.sqrt())
}

/// Boundary residual `g(S) = S - K - c(S) - (1 - e^{-q tau} N(d1)) S / q2`.
/// Negative below `S*`, positive above.
fn boundary_residual(inp: &PricingInputs, q2: f64, s: f64) -> Result<f64> {
    let euro = bs_call_price(&inp.with_spot(s))?;
    let qdisc = (-inp.div_yield * inp.tau).exp();
    let nd1 = norm_cdf(d1_at(inp, s));
    Ok(s - inp.strike - euro - (1.0 - qdisc * nd1) * s / q2)
}

fn newton_critical(inp: &PricingInputs, q: &Quadratic) -> Result<Option<f64>> {
    let k = inp.strike;
    let vsqrt = inp.vol * inp.tau.sqrt();
    let qdisc = (-inp.div_yield * inp.tau).exp();

    let s_inf = if q.q2_inf > 1.0 {
        k / (1.0 - 1.0 / q.q2_inf)
    } else {
        f64::INFINITY
    };
    let mut s = if s_inf.is_finite() {
        let h2 = -((inp.rate - inp.div_yield) * inp.tau + 2.0 * vsqrt) * k / (s_inf - k);
        k + (s_inf - k) * (1.0 - h2.exp())
    } else {
        2.0 * k
    };

    for _ in 0..NEWTON_MAX_ITER {
        if !s.is_finite() || s <= 0.0 {
            return Ok(None);
        }
        let d1 = d1_at(inp, s);
        let euro = bs_call_price(&inp.with_spot(s))?;
        let nd1 = norm_cdf(d1);
        let rhs = euro + (1.0 - qdisc * nd1) * s / q.q2;
        let lhs = s - k;
        if ((lhs - rhs) / k).abs() < REL_TOL {
            return Ok(Some(s));
        }
        let b = qdisc * nd1 * (1.0 - 1.0 / q.q2)
            + (1.0 - qdisc * norm_pdf(d1) / vsqrt) / q.q2;
        if (1.0 - b).abs() < 1e-14 {
            return Ok(None);
        }
        s = (k + rhs - b * s) / (1.0 - b);
    }
    Ok(None)
}

fn bisect_critical(inp: &PricingInputs, q2: f64) -> Result<f64> {
    let k = inp.strike;
    let mut lo = k;
    let mut hi = 2.0 * k;
    let mut grow = 0;
    while boundary_residual(inp, q2, hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(PricingError::NonConvergence {
                what: "critical price bracket",
                iterations: grow,
            });
        }
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let g = boundary_residual(inp, q2, mid)?;
        if (g / k).abs() < REL_TOL || (hi - lo) <= 1e-14 * hi {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(PricingError::NonConvergence {
        what: "critical price bisection",
        iterations: BISECT_MAX_ITER,
    })
}

/// Critical spot `S*` above which immediate exercise is optimal.
///
/// Returns `None` when there is no finite boundary (no dividend yield).
pub fn baw_critical_price(inp: &PricingInputs) -> Result<Option<f64>> {
    inp.validate()?;
    if inp.tau <= 0.0 {
        return Err(PricingError::Domain("B-AW requires tau > 0".into()));
    }
    if inp.div_yield == 0.0 {
        return Ok(None);
    }
    let q = quadratic_roots(inp);
    if !(q.q2.is_finite() && q.q2 > 1.0) {
        return Ok(None);
    }
    match newton_critical(inp, &q)? {
        Some(s) if s > inp.strike => Ok(Some(s)),
        _ => bisect_critical(inp, q.q2).map(Some),
    }
}

/// American call value by the Barone-Adesi-Whaley approximation.
///
/// With no dividend yield an American call is never exercised early, so the
/// European value is returned directly.
pub fn baw_call_price(inp: &PricingInputs) -> Result<f64> {
    inp.validate()?;
    if inp.tau <= 0.0 {
        return Err(PricingError::Domain("B-AW requires tau > 0".into()));
    }
    let euro = bs_call_price(inp)?;
    let Some(s_star) = baw_critical_price(inp)? else {
        return Ok(euro);
    };
    let intrinsic = inp.spot - inp.strike;
    if inp.spot >= s_star {
        return Ok(intrinsic);
    }
    let q2 = quadratic_roots(inp).q2;
    let qdisc = (-inp.div_yield * inp.tau).exp();
    let a2 = (s_star / q2) * (1.0 - qdisc * norm_cdf(d1_at(inp, s_star)));
    Ok((euro + a2 * (inp.spot / s_star).powf(q2)).max(intrinsic))
}
