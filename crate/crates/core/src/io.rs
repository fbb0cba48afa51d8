//! Prediction files and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One value per line, shortest round-trip decimal form.
pub fn format_predictions(pred: &[f64]) -> String {
    let mut s = String::with_capacity(pred.len() * 12);
    for p in pred {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    s
}

pub fn write_predictions(path: impl AsRef<Path>, pred: &[f64]) -> Result<()> {
    write_atomic(path, format_predictions(pred).as_bytes())
}

/// Parses predictions: either one number per line, or a CSV with a header,
/// an `id` column giving the 0-based dataset row and one value column.
pub fn parse_predictions(text: &str) -> Result<Vec<f64>> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(',') {
        parse_prediction_csv(text)
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                    row: i + 1,
                    message: format!("`{}` is not a number", l.trim()),
                })
            })
            .collect()
    }
}

fn parse_prediction_csv(text: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::MissingColumn("id".into()))?;
    let value_col = headers
        .iter()
        .position(|h| h != "id")
        .ok_or_else(|| Error::MissingColumn("prediction".into()))?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let bad = |what: &str| Error::MalformedRow {
            row,
            message: format!("bad {what}"),
        };
        let id: usize = rec
            .get(id_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("id"))?;
        let v: f64 = rec
            .get(value_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("prediction"))?;
        rows.push((id, v));
    }
    let n = rows.len();
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (id, v) in rows {
        if id >= n || seen[id] {
            return Err(Error::InvalidArgument(format!(
                "prediction ids must be a permutation of 0..{n}; offending id {id}"
            )));
        }
        seen[id] = true;
        out[id] = v;
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}
