//! Closed-form and lattice pricers for calls on a dividend-paying underlying.
//!
//! Everything here is a pure function of [`PricingInputs`]. Dividends are a
//! continuous yield; time to expiry is in years (see [`tau_from_dte`]).

mod baw;
mod binomial;
mod black_scholes;
mod normal;

pub use baw::{baw_call_price, baw_critical_price};
pub use binomial::{crr_binomial_call, crr_min_steps, ExerciseStyle};
pub use black_scholes::{bs_call_price, bs_greeks, implied_vol, GreekSet};
pub use normal::{norm_cdf, norm_pdf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Calendar-day count convention used to turn DTE into a year fraction.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Step count the lattice baseline uses throughout the evaluation pipeline.
pub const BOP_STEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("invalid pricing input: {0}")]
    Domain(String),
    #[error("binomial probability {p} outside [0, 1] with {steps} steps; need at least {min_steps} steps")]
    StepsTooFew { steps: usize, min_steps: usize, p: f64 },
    #[error("target price {target} is outside the arbitrage bounds [{lower}, {upper}]")]
    NoSolution { target: f64, lower: f64, upper: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
}

pub type Result<T> = std::result::Result<T, PricingError>;

/// Market and contract inputs for a single call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingInputs {
    pub spot: f64,
    pub strike: f64,
    /// Continuously compounded annual risk-free rate.
    pub rate: f64,
    /// Continuous annual dividend yield.
    pub div_yield: f64,
    /// Annualized volatility.
    pub vol: f64,
    /// Time to expiry in years.
    pub tau: f64,
}

/// Year fraction for an integer number of calendar days to expiry.
pub fn tau_from_dte(dte: f64) -> f64 {
    dte / DAYS_PER_YEAR
}

impl PricingInputs {
    pub fn new(spot: f64, strike: f64, rate: f64, div_yield: f64, vol: f64, tau: f64) -> Self {
        Self {
            spot,
            strike,
            rate,
            div_yield,
            vol,
            tau,
        }
    }

    pub fn with_vol(self, vol: f64) -> Self {
        Self { vol, ..self }
    }

    pub fn with_spot(self, spot: f64) -> Self {
        Self { spot, ..self }
    }

    pub fn intrinsic(&self) -> f64 {
        (self.spot - self.strike).max(0.0)
    }

    /// Lower no-arbitrage bound `max(S e^{-q tau} - K e^{-r tau}, 0)`.
    pub fn lower_bound(&self) -> f64 {
        (self.spot * (-self.div_yield * self.tau).exp()
            - self.strike * (-self.rate * self.tau).exp())
        .max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("spot", self.spot),
            ("strike", self.strike),
            ("rate", self.rate),
            ("div_yield", self.div_yield),
            ("vol", self.vol),
            ("tau", self.tau),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(PricingError::Domain(format!("{name} is not finite")));
        }
        if self.spot <= 0.0 {
            return Err(PricingError::Domain(format!("spot must be > 0, got {}", self.spot)));
        }
        if self.strike <= 0.0 {
            return Err(PricingError::Domain(format!(
                "strike must be > 0, got {}",
                self.strike
            )));
        }
        if self.tau < 0.0 {
            return Err(PricingError::Domain(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.div_yield < 0.0 {
            return Err(PricingError::Domain(format!(
                "div_yield must be >= 0, got {}",
                self.div_yield
            )));
        }
        if self.tau > 0.0 && self.vol <= 0.0 {
            return Err(PricingError::Domain(format!(
                "vol must be > 0 when tau > 0, got {}",
                self.vol
            )));
        }
        Ok(())
    }
}
