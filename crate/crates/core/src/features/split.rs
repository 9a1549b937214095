use std::collections::BTreeSet;

use chrono::NaiveDate;

use super::{FeatureError, FeatureRow, Result};

pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;
pub const DEFAULT_VAL_FRAC_OF_TRAIN: f64 = 0.2;
const MIN_ROWS: usize = 10;

/// Date-disjoint partitions in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<FeatureRow>,
    pub val: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
}

/// Sorts rows by quote date and cuts on whole dates: the last
/// `1 - train_frac` of dates go to test, then the last `val_frac_of_train`
/// of the remaining dates go to validation.
pub fn chronological_split(
    mut rows: Vec<FeatureRow>,
    train_frac: f64,
    val_frac_of_train: f64,
) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) || !(val_frac_of_train > 0.0 && val_frac_of_train < 1.0) {
        return Err(FeatureError::Fractions(format!(
            "train_frac={train_frac}, val_frac_of_train={val_frac_of_train}; both must lie in (0, 1)"
        )));
    }
    if rows.len() < MIN_ROWS {
        return Err(FeatureError::TooFewRows {
            needed: MIN_ROWS,
            got: rows.len(),
        });
    }
    rows.sort_by_key(|r| r.quote_date);
    let dates: Vec<NaiveDate> = rows
        .iter()
        .map(|r| r.quote_date)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = dates.len();
    let n_test = ((n as f64) * (1.0 - train_frac)).round() as usize;
    let n_val = (((n - n_test.min(n)) as f64) * val_frac_of_train).round() as usize;
    if n_test == 0 || n_val == 0 || n_test + n_val >= n {
        return Err(FeatureError::TooFewDistinctDates { needed: 3, got: n });
    }
    let val_start = dates[n - n_test - n_val];
    let test_start = dates[n - n_test];

    let test_at = rows.partition_point(|r| r.quote_date < test_start);
    let test = rows.split_off(test_at);
    let val_at = rows.partition_point(|r| r.quote_date < val_start);
    let val = rows.split_off(val_at);
    Ok(Split {
        train: rows,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Feature;
    use super::*;

    fn rows_on(days: &[u64]) -> Vec<FeatureRow> {
        let base = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        days.iter()
            .map(|&d| FeatureRow {
                quote_date: base + chrono::Days::new(d),
                values: [0.0; Feature::COUNT],
                target: d as f64,
            })
            .collect()
    }

    #[test]
    fn hundred_dates_split_64_16_20() {
        let days: Vec<u64> = (0..100).rev().collect();
        let s = chronological_split(rows_on(&days), 0.8, 0.2).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (64, 16, 20));
        assert!(s.train.last().unwrap().quote_date < s.val[0].quote_date);
        assert!(s.val.last().unwrap().quote_date < s.test[0].quote_date);
    }

    #[test]
    fn rows_sharing_a_date_stay_together() {
        let days: Vec<u64> = (0..20).flat_map(|d| [d, d, d]).collect();
        let s = chronological_split(rows_on(&days), 0.8, 0.2).unwrap();
        // 20 dates: 4 test, round(16 * 0.2) = 3 val, 13 train
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (39, 9, 12));
        let max_train = s.train.iter().map(|r| r.quote_date).max().unwrap();
        let min_test = s.test.iter().map(|r| r.quote_date).min().unwrap();
        assert!(max_train < min_test);
    }

    #[test]
    fn single_date_is_rejected() {
        assert!(matches!(
            chronological_split(rows_on(&[5; 12]), 0.8, 0.2),
            Err(FeatureError::TooFewDistinctDates { got: 1, .. })
        ));
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            chronological_split(rows_on(&[1, 2, 3]), 0.8, 0.2),
            Err(FeatureError::TooFewRows { needed: 10, got: 3 })
        ));
    }
}
