use serde::{Deserialize, Serialize};

use super::normal::{norm_cdf, norm_pdf};
use super::{PricingError, PricingInputs, Result};

/// Analytic call sensitivities.
///
/// Theta is per year of calendar time; vega and rho are per unit change of
/// vol and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreekSet {
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub theta: f64,
    pub rho: f64,
}

fn d1_d2(inp: &PricingInputs) -> (f64, f64) {
    let vsqrt = inp.vol * inp.tau.sqrt();
    let d1 = ((inp.spot / inp.strike).ln()
        + (inp.rate - inp.div_yield + 0.5 * inp.vol * inp.vol) * inp.tau)
        / vsqrt;
    (d1, d1 - vsqrt)
}

/// European call value with continuous dividend yield.
///
/// At `tau == 0` the intrinsic value is returned.
pub fn bs_call_price(inp: &PricingInputs) -> Result<f64> {
    inp.validate()?;
    if inp.tau == 0.0 {
        return Ok(inp.intrinsic());
    }
    let (d1, d2) = d1_d2(inp);
    let fwd_spot = inp.spot * (-inp.div_yield * inp.tau).exp();
    let disc_strike = inp.strike * (-inp.rate * inp.tau).exp();
    let price = fwd_spot * norm_cdf(d1) - disc_strike * norm_cdf(d2);
    Ok(price.max(0.0))
}

pub fn bs_greeks(inp: &PricingInputs) -> Result<GreekSet> {
    inp.validate()?;
    if inp.tau <= 0.0 {
        return Err(PricingError::Domain("greeks require tau > 0".into()));
    }
    let (d1, d2) = d1_d2(inp);
    let sqrt_t = inp.tau.sqrt();
    let qdisc = (-inp.div_yield * inp.tau).exp();
    let rdisc = (-inp.rate * inp.tau).exp();
    let pdf = norm_pdf(d1);
    let nd1 = norm_cdf(d1);
    let nd2 = norm_cdf(d2);

    Ok(GreekSet {
        delta: qdisc * nd1,
        gamma: qdisc * pdf / (inp.spot * inp.vol * sqrt_t),
        vega: inp.spot * qdisc * pdf * sqrt_t,
        theta: -inp.spot * qdisc * pdf * inp.vol / (2.0 * sqrt_t)
            - inp.rate * inp.strike * rdisc * nd2
            + inp.div_yield * inp.spot * qdisc * nd1,
        rho: inp.strike * inp.tau * rdisc * nd2,
    })
}

const IV_LOW: f64 = 1e-4;
const IV_HIGH: f64 = 5.0;
const IV_MAX_ITER: usize = 200;

/// Inverts [`bs_call_price`] for volatility. The `vol` field of `inp` is
/// ignored.
///
/// Safeguarded Newton on vega inside the bracket `[1e-4, 5]`; a step that
/// leaves the bracket is replaced by bisection. Iteration continues past the
/// `1e-8 * spot` price tolerance until the Newton step itself is negligible,
/// so low-vega quotes still recover vol tightly.
pub fn implied_vol(target_price: f64, inp: &PricingInputs) -> Result<f64> {
    let base = inp.with_vol(0.2);
    base.validate()?;
    if base.tau <= 0.0 {
        return Err(PricingError::Domain("implied vol requires tau > 0".into()));
    }
    if !target_price.is_finite() {
        return Err(PricingError::Domain("target price is not finite".into()));
    }
    let tol = 1e-8 * base.spot;
    let lower = base.lower_bound();
    let upper = base.spot * (-base.div_yield * base.tau).exp();
    if target_price < lower - tol || target_price >= upper {
        return Err(PricingError::NoSolution {
            target: target_price,
            lower,
            upper,
        });
    }

    let price_at = |vol: f64| bs_call_price(&base.with_vol(vol));
    let mut lo = IV_LOW;
    let mut hi = IV_HIGH;
    let f_lo = price_at(lo)? - target_price;
    let f_hi = price_at(hi)? - target_price;
    if f_lo > tol || f_hi < -tol {
        return Err(PricingError::NoSolution {
            target: target_price,
            lower: f_lo + target_price,
            upper: f_hi + target_price,
        });
    }
    if f_lo.abs() <= tol && f_lo.abs() <= f_hi.abs() {
        return Ok(lo);
    }

    let mut vol = 0.5 * (lo + hi).min(1.0);
    let mut best = (f64::INFINITY, vol);
    for _ in 0..IV_MAX_ITER {
        let p = base.with_vol(vol);
        let diff = bs_call_price(&p)? - target_price;
        if diff.abs() < best.0 {
            best = (diff.abs(), vol);
        }
        if diff == 0.0 {
            return Ok(vol);
        }
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = bs_greeks(&p)?.vega;
        let newton = if vega > 0.0 { vol - diff / vega } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - vol).abs();
        vol = next;
        if diff.abs() <= tol && step <= 1e-12 * vol.max(1.0) {
            return Ok(vol);
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(PricingError::NonConvergence {
            what: "implied volatility",
            iterations: IV_MAX_ITER,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atm() -> PricingInputs {
        PricingInputs::new(100.0, 100.0, 0.05, 0.0, 0.2, 1.0)
    }

    /// Normal CDF from the Maclaurin series of erf, summed to convergence.
    /// Independent of the libm path used by the pricer.
    fn series_cdf(x: f64) -> f64 {
        let z = x / std::f64::consts::SQRT_2;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            n += 1.0;
            term *= -z * z / n;
            sum += term / (2.0 * n + 1.0);
            if n > 500.0 {
                break;
            }
        }
        0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
    }

    fn oracle_call(inp: &PricingInputs) -> f64 {
        let vsqrt = inp.vol * inp.tau.sqrt();
        let d1 = ((inp.spot / inp.strike).ln()
            + (inp.rate - inp.div_yield + 0.5 * inp.vol * inp.vol) * inp.tau)
            / vsqrt;
        let d2 = d1 - vsqrt;
        inp.spot * (-inp.div_yield * inp.tau).exp() * series_cdf(d1)
            - inp.strike * (-inp.rate * inp.tau).exp() * series_cdf(d2)
    }

    #[test]
    fn atm_price_matches_series_oracle() {
        let oracle = oracle_call(&atm());
        // frozen from a 40-digit evaluation: 10.450583572185566
        assert!((oracle - 10.450_583_572_185_567).abs() < 1e-12);
        let price = bs_call_price(&atm()).unwrap();
        assert!((price - 10.4506).abs() < 1e-4);
        assert!((price - oracle).abs() < 1e-12);
    }

    #[test]
    fn expiry_returns_intrinsic() {
        let inp = PricingInputs::new(100.0, 80.0, 0.05, 0.0, 0.2, 0.0);
        assert_eq!(bs_call_price(&inp).unwrap(), 20.0);
    }

    #[test]
    fn zero_vol_limit_is_discounted_forward_intrinsic() {
        let inp = atm().with_vol(1e-9);
        let expected = 100.0 - 100.0 * (-0.05f64).exp();
        assert!((bs_call_price(&inp).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 4.8771).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut inp = atm();
        inp.tau = -0.1;
        assert!(matches!(bs_call_price(&inp), Err(PricingError::Domain(_))));
        inp = atm();
        inp.spot = 0.0;
        assert!(bs_call_price(&inp).is_err());
        inp = atm();
        inp.strike = -1.0;
        assert!(bs_call_price(&inp).is_err());
    }

    #[test]
    fn atm_delta_matches_oracle() {
        let g = bs_greeks(&atm()).unwrap();
        let vsqrt = 0.2;
        let d1 = (0.05 + 0.02) / vsqrt;
        assert!((g.delta - series_cdf(d1)).abs() < 1e-12);
        assert!((g.delta - 0.6368).abs() < 1e-4);
    }

    #[test]
    fn deep_itm_limits() {
        let g = bs_greeks(&PricingInputs::new(300.0, 100.0, 0.05, 0.0, 0.2, 0.1)).unwrap();
        assert!((g.delta - 1.0).abs() < 1e-6);
        assert!(g.gamma.abs() < 1e-6);
    }

    #[test]
    fn greeks_reject_expiry() {
        let inp = atm();
        assert!(bs_greeks(&PricingInputs { tau: 0.0, ..inp }).is_err());
    }

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel_close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) + abs_floor
    }

    #[test]
    fn gamma_matches_delta_difference() {
        let inp = atm();
        let h = 1e-4;
        let fd = central(|s| bs_greeks(&inp.with_spot(s)).unwrap().delta, inp.spot, h);
        let g = bs_greeks(&inp).unwrap().gamma;
        assert!(rel_close(fd, g, 1e-4, 0.0), "fd={fd} gamma={g}");
    }

    #[test]
    fn greeks_match_price_differences_on_grid() {
        let h = 1e-4;
        for &m in &[0.8, 1.0, 1.2] {
            for &vol in &[0.1, 0.3] {
                for &tau in &[0.25, 1.0] {
                    for &q in &[0.0, 0.03] {
                        let inp = PricingInputs::new(100.0 * m, 100.0, 0.05, q, vol, tau);
                        let g = bs_greeks(&inp).unwrap();
                        let price = |p: PricingInputs| bs_call_price(&p).unwrap();
                        let d = central(|s| price(PricingInputs { spot: s, ..inp }), inp.spot, h);
                        let v = central(|s| price(PricingInputs { vol: s, ..inp }), vol, h);
                        let r = central(|s| price(PricingInputs { rate: s, ..inp }), 0.05, h);
                        let t = -central(|s| price(PricingInputs { tau: s, ..inp }), tau, h);
                        let gamma_fd =
                            central(|s| bs_greeks(&inp.with_spot(s)).unwrap().delta, inp.spot, h);
                        // absolute floor covers greeks that are numerically zero
                        assert!(rel_close(d, g.delta, 1e-4, 1e-8), "delta {inp:?}");
                        assert!(rel_close(v, g.vega, 1e-4, 1e-7), "vega {inp:?}");
                        assert!(rel_close(r, g.rho, 1e-4, 1e-7), "rho {inp:?}");
                        assert!(rel_close(t, g.theta, 1e-4, 1e-7), "theta {inp:?}");
                        assert!(rel_close(gamma_fd, g.gamma, 1e-4, 1e-9), "gamma {inp:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn implied_vol_round_trips() {
        let p = bs_call_price(&atm()).unwrap();
        assert!((implied_vol(p, &atm()).unwrap() - 0.2).abs() < 1e-6);

        let inp = PricingInputs::new(50.0, 60.0, 0.03, 0.01, 0.8, 0.5);
        let p = bs_call_price(&inp).unwrap();
        assert!((implied_vol(p, &inp).unwrap() - 0.8).abs() < 1e-6);
    }

    #[test]
    fn implied_vol_rejects_arbitrage_violations() {
        let inp = PricingInputs::new(120.0, 100.0, 0.05, 0.0, 0.2, 1.0);
        let below = inp.lower_bound() - 1.0;
        assert!(matches!(
            implied_vol(below, &inp),
            Err(PricingError::NoSolution { .. })
        ));
        assert!(matches!(
            implied_vol(130.0, &inp),
            Err(PricingError::NoSolution { .. })
        ));
    }

    proptest! {
        #[test]
        fn price_within_no_arbitrage_bounds(
            m in 0.5f64..1.5, vol in 0.05f64..1.0, tau in 0.0f64..2.0,
            r in 0.0f64..0.1, q in 0.0f64..0.1,
        ) {
            let inp = PricingInputs::new(100.0 * m, 100.0, r, q, vol, tau);
            let p = bs_call_price(&inp).unwrap();
            prop_assert!(p >= inp.lower_bound() - 1e-9);
            prop_assert!(p <= inp.spot);
        }

        #[test]
        fn greeks_have_call_signs(
            m in 0.5f64..1.5, vol in 0.05f64..1.0, tau in 0.01f64..2.0, q in 0.0f64..0.1,
        ) {
            let g = bs_greeks(&PricingInputs::new(100.0 * m, 100.0, 0.05, q, vol, tau)).unwrap();
            prop_assert!((0.0..=1.0).contains(&g.delta));
            prop_assert!(g.gamma >= 0.0);
            prop_assert!(g.vega >= 0.0);
        }
    }
}
