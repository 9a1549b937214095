use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureError, FeatureRow, Result};

/// Name under which the regression target's range is stored.
pub const TARGET: &str = "target";

/// Per-column `(min, max)` ranges fitted on training rows, target included.
///
/// Serializes as a JSON object of `column -> [min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalerParams(BTreeMap<String, (f64, f64)>);

fn fit_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    // constant column: unit range keeps the transform defined
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

impl ScalerParams {
    pub fn fit(rows: &[FeatureRow]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(FeatureError::TooFewRows {
                needed: 2,
                got: rows.len(),
            });
        }
        let mut ranges: BTreeMap<String, (f64, f64)> = Feature::ALL
            .iter()
            .map(|&f| (f.name().to_string(), fit_range(rows.iter().map(|r| r.get(f)))))
            .collect();
        ranges.insert(TARGET.into(), fit_range(rows.iter().map(|r| r.target)));
        Ok(Self(ranges))
    }

    pub fn range(&self, column: &str) -> Result<(f64, f64)> {
        self.0
            .get(column)
            .copied()
            .ok_or_else(|| FeatureError::UnknownColumn(column.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// `(x - min) / (max - min)`, unclipped.
    pub fn scale(&self, column: &str, x: f64) -> Result<f64> {
        let (lo, hi) = self.range(column)?;
        Ok((x - lo) / (hi - lo))
    }

    pub fn unscale(&self, column: &str, s: f64) -> Result<f64> {
        let (lo, hi) = self.range(column)?;
        Ok(s * (hi - lo) + lo)
    }

    pub fn inverse_transform_target(&self, scaled: f64) -> Result<f64> {
        self.unscale(TARGET, scaled)
    }

    /// Every feature and the target scaled.
    pub fn transform(&self, rows: &[FeatureRow]) -> Result<Vec<FeatureRow>> {
        let ranges: Vec<(f64, f64)> = Feature::ALL
            .iter()
            .map(|f| self.range(f.name()))
            .collect::<Result<_>>()?;
        let (tlo, thi) = self.range(TARGET)?;
        Ok(rows
            .iter()
            .map(|r| {
                let mut out = r.clone();
                for (v, (lo, hi)) in out.values.iter_mut().zip(&ranges) {
                    *v = (*v - lo) / (hi - lo);
                }
                out.target = (r.target - tlo) / (thi - tlo);
                out
            })
            .collect())
    }

    /// Scaled `rows × columns` network input matrix.
    pub fn transform_matrix(&self, rows: &[FeatureRow], columns: &[Feature]) -> Result<Array2<f64>> {
        let ranges: Vec<(f64, f64)> = columns
            .iter()
            .map(|f| self.range(f.name()))
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_fn((rows.len(), columns.len()), |(i, j)| {
            let (lo, hi) = ranges[j];
            (rows[i].get(columns[j]) - lo) / (hi - lo)
        }))
    }

    pub fn transform_targets(&self, rows: &[FeatureRow]) -> Result<Array1<f64>> {
        let (lo, hi) = self.range(TARGET)?;
        Ok(rows.iter().map(|r| (r.target - lo) / (hi - lo)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if let Some((name, _)) = p.0.iter().find(|(_, (lo, hi))| !(hi >= lo)) {
            return Err(FeatureError::Fractions(format!("scaler range for {name} has max < min")));
        }
        Ok(p)
    }
}
