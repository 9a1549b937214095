use std::path::Path;

use super::{Feature, FeatureError, FeatureRow, Result};

fn csv_err(path: &Path, err: csv::Error) -> FeatureError {
    match err.position() {
        Some(pos) => FeatureError::Parse {
            path: path.display().to_string(),
            line: pos.line(),
            message: err.to_string(),
        },
        None => FeatureError::Csv {
            path: path.display().to_string(),
            source: err,
        },
    }
}

fn header() -> Vec<&'static str> {
    Feature::ALL
        .iter()
        .map(|f| f.name())
        .chain(["target", "quote_date"])
        .collect()
}

/// Writes one row per quote: every distinct feature column in canonical
/// order, then `target` and `quote_date`.
pub fn write_features_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header()).map_err(|e| csv_err(path, e))?;
    let mut rec = Vec::with_capacity(Feature::COUNT + 2);
    for r in rows {
        rec.clear();
        rec.extend(r.values.iter().map(|v| v.to_string()));
        rec.push(r.target.to_string());
        rec.push(r.quote_date.to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e.into()))?;
    Ok(())
}

pub fn load_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let wanted = header();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|c| position(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(FeatureError::Schema {
            path: path.display().to_string(),
            missing,
        });
    }
    let idx: Vec<usize> = wanted.iter().map(|c| position(c).unwrap_or_default()).collect();

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(i as u64 + 2, |p| p.line());
        let parse_err = |col: &str, raw: &str| FeatureError::Parse {
            path: path.display().to_string(),
            line,
            message: format!("bad value {raw:?} in column {col}"),
        };
        let mut row = FeatureRow {
            quote_date: chrono::NaiveDate::MIN,
            values: [0.0; Feature::COUNT],
            target: 0.0,
        };
        for (j, col) in wanted.iter().enumerate() {
            let raw = rec.get(idx[j]).unwrap_or("");
            if j < Feature::COUNT {
                row.values[j] = raw.parse().map_err(|_| parse_err(col, raw))?;
            } else if *col == "target" {
                row.target = raw.parse().map_err(|_| parse_err(col, raw))?;
            } else {
                row.quote_date = raw.parse().map_err(|_| parse_err(col, raw))?;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
