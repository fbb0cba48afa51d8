//! Survival datasets: CSV ingestion, train-only preprocessing, and the
//! hold-out / resampling splits used by the evaluation protocol.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, round_half_up};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    /// Covariate cells hold the level index as `f64`.
    Categorical {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical { levels },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric)
    }
}

/// One subject: observed time, event indicator and covariates.
/// Missing covariates are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }

    /// Record without covariates, for metric-only work.
    pub fn bare(time: f64, event: bool) -> Self {
        Self::new(time, event, Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub schema: Vec<ColumnSchema>,
    pub records: Vec<SurvivalRecord>,
}

impl SurvivalDataset {
    /// Builds a dataset, checking times and covariate widths.
    pub fn new(schema: Vec<ColumnSchema>, records: Vec<SurvivalRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("time must be finite and nonnegative, got {}", r.time),
                });
            }
            if r.covariates.len() != schema.len() {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("expected {} covariates, got {}", schema.len(), r.covariates.len()),
                });
            }
        }
        Ok(Self { schema, records })
    }

    /// Dataset with no covariates from parallel time/event slices.
    pub fn from_times(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                actual: events.len(),
            });
        }
        let records = times
            .iter()
            .zip(events)
            .map(|(&t, &e)| SurvivalRecord::bare(t, e))
            .collect();
        Self::new(Vec::new(), records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn event_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.n_events() as f64 / self.len() as f64
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Writes the dataset back out as CSV with `time,event` leading columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.schema.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.time.to_string(), if r.event { "1" } else { "0" }.to_string()];
            for (col, &v) in self.schema.iter().zip(&r.covariates) {
                row.push(if v.is_nan() {
                    String::new()
                } else {
                    match &col.kind {
                        ColumnKind::Numeric => v.to_string(),
                        ColumnKind::Categorical { levels } => levels[v as usize].clone(),
                    }
                });
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Options for [`load_csv_with`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Columns forced to categorical even when every cell parses as a number.
    pub categorical: Vec<String>,
}

/// Loads a survival dataset. Covariate kinds are inferred: a column is
/// numeric when every nonempty cell parses as a number.
pub fn load_csv(path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    load_csv_with(path, time_col, event_col, &CsvOptions::default())
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    time_col: &str,
    event_col: &str,
    opts: &CsvOptions,
) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, time_col, event_col, opts)
}

fn parse_event(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

pub fn read_csv<R: Read>(
    reader: R,
    time_col: &str,
    event_col: &str,
    opts: &CsvOptions,
) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = find(time_col)?;
    let event_idx = find(event_col)?;
    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != time_idx && i != event_idx)
        .collect();

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {} fields, got {}", headers.len(), rec.len()),
            });
        }
        let tcell = rec[time_idx].trim();
        let time: f64 = tcell.parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("time `{tcell}` is not a number"),
        })?;
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::MalformedRow {
                row,
                message: format!("time must be finite and nonnegative, got {tcell}"),
            });
        }
        let ecell = rec[event_idx].trim();
        let event = parse_event(ecell).ok_or_else(|| Error::MalformedRow {
            row,
            message: format!("unknown event encoding `{ecell}`"),
        })?;
        times.push(time);
        events.push(event);
        raw.push(cov_idx.iter().map(|&c| rec[c].trim().to_string()).collect());
    }

    let mut schema = Vec::with_capacity(cov_idx.len());
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cov_idx.len());
    for (k, &c) in cov_idx.iter().enumerate() {
        let name = headers[c].clone();
        let forced = opts.categorical.contains(&name);
        let numeric = !forced && raw.iter().all(|r| r[k].is_empty() || r[k].parse::<f64>().is_ok());
        if numeric {
            columns.push(
                raw.iter()
                    .map(|r| {
                        if r[k].is_empty() {
                            f64::NAN
                        } else {
                            r[k].parse().unwrap()
                        }
                    })
                    .collect(),
            );
            schema.push(ColumnSchema::numeric(name));
        } else {
            let mut levels: Vec<String> = Vec::new();
            let mut lookup: HashMap<String, usize> = HashMap::new();
            let codes = raw
                .iter()
                .map(|r| {
                    if r[k].is_empty() {
                        return f64::NAN;
                    }
                    let next = levels.len();
                    let code = *lookup.entry(r[k].clone()).or_insert_with(|| {
                        levels.push(r[k].clone());
                        next
                    });
                    code as f64
                })
                .collect();
            columns.push(codes);
            schema.push(ColumnSchema::categorical(name, levels));
        }
    }

    let records = (0..times.len())
        .map(|i| SurvivalRecord::new(times[i], events[i], columns.iter().map(|c| c[i]).collect()))
        .collect();
    SurvivalDataset::new(schema, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnPlan {
    Numeric {
        name: String,
        median: f64,
        mean: f64,
        std: f64,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
        mode: Option<String>,
    },
}

impl ColumnPlan {
    pub fn name(&self) -> &str {
        match self {
            ColumnPlan::Numeric { name, .. } | ColumnPlan::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnPlan::Numeric { .. } => 1,
            ColumnPlan::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// Statistics fitted on a training split and replayed on any other split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub columns: Vec<ColumnPlan>,
    /// Largest observed time in the training split.
    pub time_scale: f64,
    pub power: f64,
}

impl PreprocessPlan {
    /// `t' = (t / scale)^p`.
    pub fn transform_time(&self, t: f64) -> f64 {
        (t / self.time_scale).powf(self.power)
    }

    /// Inverse of [`transform_time`](Self::transform_time); negative inputs map to 0.
    pub fn inverse_time(&self, t: f64) -> f64 {
        t.max(0.0).powf(1.0 / self.power) * self.time_scale
    }

    pub fn output_width(&self) -> usize {
        self.columns.iter().map(ColumnPlan::width).sum()
    }

    pub fn output_schema(&self) -> Vec<ColumnSchema> {
        let mut out = Vec::with_capacity(self.output_width());
        for col in &self.columns {
            match col {
                ColumnPlan::Numeric { name, .. } => out.push(ColumnSchema::numeric(name.clone())),
                ColumnPlan::Categorical { name, categories, .. } => out.extend(
                    categories
                        .iter()
                        .map(|c| ColumnSchema::numeric(format!("{name}={c}"))),
                ),
            }
        }
        out
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fits imputation, standardization, one-hot and target statistics on
/// `train`. Standardization statistics are population moments of the
/// imputed column; a zero-variance column gets `std = 1`.
pub fn fit_preprocess(train: &SurvivalDataset, power: f64) -> Result<PreprocessPlan> {
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit preprocessing on an empty split".into(),
        ));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power exponent must be > 0, got {power}"
        )));
    }
    let time_scale = train.records.iter().map(|r| r.time).fold(0.0, f64::max);
    if time_scale <= 0.0 {
        return Err(Error::InvalidArgument("all training times are zero".into()));
    }

    let n = train.len() as f64;
    let mut columns = Vec::with_capacity(train.schema.len());
    for (k, col) in train.schema.iter().enumerate() {
        let values = train.records.iter().map(|r| r.covariates[k]);
        match &col.kind {
            ColumnKind::Numeric => {
                let mut present: Vec<f64> = values.clone().filter(|v| !v.is_nan()).collect();
                present.sort_by(f64::total_cmp);
                let med = if present.is_empty() { 0.0 } else { median(&present) };
                let imputed = || values.clone().map(|v| if v.is_nan() { med } else { v });
                let mean = imputed().sum::<f64>() / n;
                let var = imputed().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                columns.push(ColumnPlan::Numeric {
                    name: col.name.clone(),
                    median: med,
                    mean,
                    std,
                });
            }
            ColumnKind::Categorical { levels } => {
                let mut counts = vec![0usize; levels.len()];
                for v in values.filter(|v| !v.is_nan()) {
                    counts[v as usize] += 1;
                }
                // levels absent from this split are dropped
                let categories: Vec<String> = levels
                    .iter()
                    .zip(&counts)
                    .filter(|(_, &c)| c > 0)
                    .map(|(l, _)| l.clone())
                    .collect();
                let mode = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .fold(None::<(usize, usize)>, |best, (i, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((i, c)),
                    })
                    .map(|(i, _)| levels[i].clone());
                columns.push(ColumnPlan::Categorical {
                    name: col.name.clone(),
                    categories,
                    mode,
                });
            }
        }
    }
    Ok(PreprocessPlan {
        columns,
        time_scale,
        power,
    })
}

/// Applies a fitted plan. The output is all-numeric: standardized numeric
/// columns followed in schema order by one-hot blocks, and transformed times.
pub fn apply_preprocess(plan: &PreprocessPlan, data: &SurvivalDataset) -> Result<SurvivalDataset> {
    if plan.columns.len() != data.schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "plan has {} columns, data has {}",
            plan.columns.len(),
            data.schema.len()
        )));
    }
    // per categorical column: data level index -> plan category index
    let mut level_maps: Vec<Option<Vec<Option<usize>>>> = Vec::with_capacity(plan.columns.len());
    for (cp, cs) in plan.columns.iter().zip(&data.schema) {
        if cp.name() != cs.name {
            return Err(Error::SchemaMismatch(format!(
                "expected column `{}`, found `{}`",
                cp.name(),
                cs.name
            )));
        }
        match (cp, &cs.kind) {
            (ColumnPlan::Numeric { .. }, ColumnKind::Numeric) => level_maps.push(None),
            (ColumnPlan::Categorical { categories, .. }, ColumnKind::Categorical { levels }) => {
                level_maps.push(Some(
                    levels
                        .iter()
                        .map(|l| categories.iter().position(|c| c == l))
                        .collect(),
                ));
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` changed kind",
                    cs.name
                )))
            }
        }
    }

    let width = plan.output_width();
    let records = data
        .records
        .iter()
        .map(|r| {
            let mut x = Vec::with_capacity(width);
            for (k, cp) in plan.columns.iter().enumerate() {
                let v = r.covariates[k];
                match cp {
                    ColumnPlan::Numeric {
                        median, mean, std, ..
                    } => {
                        let v = if v.is_nan() { *median } else { v };
                        x.push((v - mean) / std);
                    }
                    ColumnPlan::Categorical { categories, mode, .. } => {
                        let slot = if v.is_nan() {
                            mode.as_ref().and_then(|m| categories.iter().position(|c| c == m))
                        } else {
                            level_maps[k].as_ref().unwrap()[v as usize]
                        };
                        let start = x.len();
                        x.resize(start + categories.len(), 0.0);
                        if let Some(s) = slot {
                            x[start + s] = 1.0;
                        }
                    }
                }
            }
            SurvivalRecord::new(plan.transform_time(r.time), r.event, x)
        })
        .collect();
    Ok(SurvivalDataset {
        schema: plan.output_schema(),
        records,
    })
}

/// Row indices of a seeded hold-out split, each side in ascending order.
/// The test side has `round(frac * n)` rows.
pub fn holdout_indices(n: usize, frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "hold-out fraction must be in (0,1), got {frac}"
        )));
    }
    let n_test = round_half_up(frac * n as f64).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Splits off a hold-out test set; returns `(train, test)`.
pub fn split_holdout(
    data: &SurvivalDataset,
    frac: f64,
    seed: u64,
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    let (train, test) = holdout_indices(data.len(), frac, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Independent random train/validation splits of the same pool. Each fold
/// draws its own permutation from a seed derived from `(seed, fold)`.
pub fn resample_folds(pool_size: usize, n_folds: usize, train_frac: f64, seed: u64) -> Result<Vec<Fold>> {
    if n_folds == 0 {
        return Err(Error::InvalidArgument("n_folds must be >= 1".into()));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0,1), got {train_frac}"
        )));
    }
    let n_train = round_half_up(train_frac * pool_size as f64).min(pool_size);
    Ok((0..n_folds)
        .map(|f| {
            let mut idx: Vec<usize> = (0..pool_size).collect();
            idx.shuffle(&mut rng_from_seed(derive_seed(seed, &[f as u64])));
            let mut train = idx[..n_train].to_vec();
            let mut validation = idx[n_train..].to_vec();
            train.sort_unstable();
            validation.sort_unstable();
            Fold { train, validation }
        })
        .collect())
}
