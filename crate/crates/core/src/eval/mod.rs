//! Error metrics and the four-model comparison (MNN, B-AW, BOP, FNN).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Feature, FeatureRow};
use crate::pricing::{
    baw_call_price, crr_binomial_call, tau_from_dte, ExerciseStyle, PricingError, PricingInputs, BOP_STEPS,
};
use crate::zoo::{TrainedModel, ZooError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {actual} actuals")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("empty input")]
    Empty,
    #[error("mean actual price is {0}; nRMSE needs a positive mean")]
    NonPositiveMean(f64),
    #[error("row {row}: pricer input `{column}` is missing or invalid ({value})")]
    MissingInput {
        row: usize,
        column: &'static str,
        value: f64,
    },
    #[error("row {row}: {source}")]
    Pricing {
        row: usize,
        #[source]
        source: PricingError,
    },
    #[error(transparent)]
    Zoo(#[from] ZooError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Root mean squared error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// RMSE divided by the mean actual value.
pub fn nrmse_by_mean(rmse_value: f64, actual: &[f64]) -> Result<f64> {
    let m = mean(actual)?;
    if m <= 0.0 || m.is_nan() {
        return Err(EvalError::NonPositiveMean(m));
    }
    Ok(rmse_value / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rmse: f64,
    pub nrmse: f64,
}

impl Score {
    pub fn compute(pred: &[f64], actual: &[f64]) -> Result<Self> {
        let rmse = rmse(pred, actual)?;
        Ok(Self {
            rmse,
            nrmse: nrmse_by_mean(rmse, actual)?,
        })
    }
}

/// Field order is the report's column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub mnn: Score,
    pub baw: Score,
    pub bop: Score,
    pub fnn: Score,
}

impl ModelScores {
    pub fn entries(&self) -> [(&'static str, Score); 4] {
        [("MNN", self.mnn), ("B-AW", self.baw), ("BOP", self.bop), ("FNN", self.fnn)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n: usize,
    pub mean_actual: f64,
    pub models: ModelScores,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table with one row per model.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset: {}  rows: {}  mean price: {:.4}", self.dataset, self.n, self.mean_actual);
        let _ = writeln!(s, "{:<6} {:>12} {:>10}", "model", "RMSE", "nRMSE");
        for (name, sc) in self.models.entries() {
            let _ = writeln!(s, "{:<6} {:>12.4} {:>10.4}", name, sc.rmse, sc.nrmse);
        }
        s
    }
}

/// Inputs for the traditional pricers: the quote's implied volatility is used
/// as sigma.
pub fn pricer_inputs(row: &FeatureRow) -> PricingInputs {
    PricingInputs {
        spot: row.get(Feature::UnderlyingLast),
        strike: row.get(Feature::Strike),
        rate: row.get(Feature::Rate),
        div_yield: row.get(Feature::DividendYield),
        vol: row.get(Feature::ImpliedVol),
        tau: tau_from_dte(row.get(Feature::Dte)),
    }
}

fn checked_inputs(i: usize, row: &FeatureRow) -> Result<PricingInputs> {
    let checks = [
        (Feature::UnderlyingLast, true),
        (Feature::Strike, true),
        (Feature::Rate, false),
        (Feature::DividendYield, false),
        (Feature::ImpliedVol, true),
        (Feature::Dte, true),
    ];
    for (f, positive) in checks {
        let v = row.get(f);
        if !v.is_finite() || (positive && v <= 0.0) || (f == Feature::DividendYield && v < 0.0) {
            return Err(EvalError::MissingInput {
                row: i,
                column: f.name(),
                value: v,
            });
        }
    }
    Ok(pricer_inputs(row))
}

/// B-AW and 100-step CRR American prices for every row.
pub fn traditional_predictions(rows: &[FeatureRow]) -> Result<(Vec<f64>, Vec<f64>)> {
    let priced: Vec<(f64, f64)> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let inp = checked_inputs(i, row)?;
            let err = |source| EvalError::Pricing { row: i, source };
            let baw = baw_call_price(&inp).map_err(err)?;
            let bop = crr_binomial_call(&inp, BOP_STEPS, ExerciseStyle::American).map_err(err)?;
            Ok((baw, bop))
        })
        .collect::<Result<_>>()?;
    Ok(priced.into_iter().unzip())
}

/// Scores all four models on `rows` against their target prices.
pub fn compare_models(
    dataset: &str,
    rows: &[FeatureRow],
    mnn: &TrainedModel,
    fnn: &TrainedModel,
) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let (baw, bop) = traditional_predictions(rows)?;
    let mnn_pred = mnn.predict_prices(rows)?;
    let fnn_pred = fnn.predict_prices(rows)?;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        n: rows.len(),
        mean_actual: mean(&actual)?,
        models: ModelScores {
            mnn: Score::compute(&mnn_pred, &actual)?,
            baw: Score::compute(&baw, &actual)?,
            bop: Score::compute(&bop, &actual)?,
            fnn: Score::compute(&fnn_pred, &actual)?,
        },
    })
}
