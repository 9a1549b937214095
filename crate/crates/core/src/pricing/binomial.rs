use serde::{Deserialize, Serialize};

use super::{PricingError, PricingInputs, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    American,
    European,
}

/// Smallest step count for which the CRR probability stays inside `[0, 1]`.
///
/// `p` is valid iff `|r - q| * dt <= vol * sqrt(dt)`, i.e.
/// `steps >= tau * (r - q)^2 / vol^2`. The bound is made strict so rounding
/// at the boundary cannot push `p` past 1.
pub fn crr_min_steps(inp: &PricingInputs) -> usize {
    let drift = inp.rate - inp.div_yield;
    let needed = inp.tau * drift * drift / (inp.vol * inp.vol);
    needed.floor() as usize + 1
}

/// Cox-Ross-Rubinstein lattice value of a call.
///
/// The American style takes `max(continuation, S - K)` at every node. Both
/// styles share the same rollback arithmetic, so when early exercise is never
/// optimal the two results are bitwise identical.
pub fn crr_binomial_call(inp: &PricingInputs, steps: usize, style: ExerciseStyle) -> Result<f64> {
    inp.validate()?;
    if steps == 0 {
        return Err(PricingError::Domain("binomial steps must be >= 1".into()));
    }
    if inp.tau == 0.0 {
        return Ok(inp.intrinsic());
    }

    let dt = inp.tau / steps as f64;
    let u = (inp.vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let p = (((inp.rate - inp.div_yield) * dt).exp() - d) / (u - d);
    if !(0.0..=1.0).contains(&p) {
        return Err(PricingError::StepsTooFew {
            steps,
            min_steps: crr_min_steps(inp),
            p,
        });
    }
    let disc = (-inp.rate * dt).exp();
    let pu = disc * p;
    let pd = disc * (1.0 - p);

    // spot at level k (net up-moves) is spot * u^k for k in -steps..=steps
    let n = steps as i32;
    let levels: Vec<f64> = (-n..=n).map(|k| inp.spot * u.powi(k)).collect();
    let spot_at = |step: usize, ups: usize| levels[2 * ups + steps - step];

    let mut values: Vec<f64> = (0..=steps)
        .map(|j| (spot_at(steps, j) - inp.strike).max(0.0))
        .collect();

    for step in (0..steps).rev() {
        for j in 0..=step {
            let cont = pu * values[j + 1] + pd * values[j];
            values[j] = match style {
                ExerciseStyle::European => cont,
                ExerciseStyle::American => cont.max(spot_at(step, j) - inp.strike),
            };
        }
    }
    Ok(values[0])
}
