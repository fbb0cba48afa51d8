//! Experiments on dataset size and censoring level, and the fold-level
//! statistics used to compare models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::concordance::{count_pairs_fast, decompose, CIndexDecomposition, Comparability, PairCounts};
use crate::dataset::{apply_preprocess, fit_preprocess, holdout_indices, resample_folds, SurvivalDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, round_half_up};
use crate::surved::{fit, FitOptions, ModelConfig, SurvedModel};

/// An event-fraction target this close to the current fraction leaves the
/// data untouched; published percentages are rounded to whole points.
pub const FRACTION_SNAP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SizeOnly,
    CensoringOnly,
    SizeAndCensoring,
}

impl ExperimentKind {
    fn id(self) -> u64 {
        match self {
            ExperimentKind::SizeOnly => 1,
            ExperimentKind::CensoringOnly => 2,
            ExperimentKind::SizeAndCensoring => 3,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::SizeOnly => "size_only",
            ExperimentKind::CensoringOnly => "censoring_only",
            ExperimentKind::SizeAndCensoring => "size_and_censoring",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "size_only" | "size" => Ok(ExperimentKind::SizeOnly),
            "censoring_only" | "censoring" => Ok(ExperimentKind::CensoringOnly),
            "size_and_censoring" | "both" => Ok(ExperimentKind::SizeAndCensoring),
            other => Err(Error::InvalidArgument(format!("unknown experiment `{other}`"))),
        }
    }
}

/// One grid point. `target` is a size fraction for [`ExperimentKind::SizeOnly`]
/// and an event fraction otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub target: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, target: f64, seed: u64) -> Result<Self> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target must be in (0,1], got {target}"
            )));
        }
        Ok(Self { kind, target, seed })
    }

    pub fn generate(&self, data: &SurvivalDataset) -> Result<Manipulated> {
        match self.kind {
            ExperimentKind::SizeOnly => {
                size_only(data, round_half_up(self.target * data.len() as f64), self.seed)
            }
            ExperimentKind::CensoringOnly => censoring_only(data, self.target, self.seed),
            ExperimentKind::SizeAndCensoring => size_and_censoring(data, self.target, self.seed),
        }
    }
}

/// A generated dataset and, for each of its rows, the source row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Manipulated {
    pub dataset: SurvivalDataset,
    pub rows: Vec<usize>,
}

impl Manipulated {
    fn identity(data: &SurvivalDataset) -> Self {
        Self {
            dataset: data.clone(),
            rows: (0..data.len()).collect(),
        }
    }

    fn from_rows(data: &SurvivalDataset, mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        Self {
            dataset: data.subset(&rows),
            rows,
        }
    }
}

fn indices_by_event(data: &SurvivalDataset) -> (Vec<usize>, Vec<usize>) {
    (0..data.len()).partition(|&i| data.records[i].event)
}

/// `k` members of `pool` chosen uniformly without replacement.
fn choose(pool: &[usize], k: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Random subsample of `target_size` rows keeping the event fraction
/// (stratified by event indicator). Rows keep their original order.
pub fn size_only(data: &SurvivalDataset, target_size: usize, seed: u64) -> Result<Manipulated> {
    let n = data.len();
    if target_size > n {
        return Err(Error::InvalidArgument(format!(
            "target size {target_size} exceeds {n} rows"
        )));
    }
    if target_size == n {
        return Ok(Manipulated::identity(data));
    }
    let (events, censored) = indices_by_event(data);
    let mut n_events = round_half_up(target_size as f64 * events.len() as f64 / n as f64);
    n_events = n_events
        .min(events.len())
        .max(target_size.saturating_sub(censored.len()));
    let n_censored = target_size - n_events;
    if n_censored > censored.len() {
        return Err(Error::InvalidArgument(
            "target larger than available strata".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut rows = choose(&events, n_events, &mut rng);
    rows.extend(choose(&censored, n_censored, &mut rng));
    Ok(Manipulated::from_rows(data, rows))
}

fn check_event_target(data: &SurvivalDataset, target: f64) -> Result<bool> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "event fraction must be in (0,1], got {target}"
        )));
    }
    let current = data.event_fraction();
    if (target - current).abs() <= FRACTION_SNAP {
        return Ok(true);
    }
    if target > current {
        return Err(Error::InvalidArgument(format!(
            "target event fraction {target} is above the current {current:.4}"
        )));
    }
    Ok(false)
}

/// Flips randomly chosen events to censored (keeping their recorded times)
/// until `round(target·n)` events remain. Size is unchanged.
pub fn censoring_only(data: &SurvivalDataset, target_event_frac: f64, seed: u64) -> Result<Manipulated> {
    if check_event_target(data, target_event_frac)? {
        return Ok(Manipulated::identity(data));
    }
    let (events, _) = indices_by_event(data);
    let keep = round_half_up(target_event_frac * data.len() as f64).min(events.len());
    let mut rng = rng_from_seed(seed);
    let mut out = Manipulated::identity(data);
    for k in choose(&events, events.len() - keep, &mut rng) {
        out.dataset.records[k].event = false;
    }
    Ok(out)
}

/// Drops randomly chosen events until events make up `target` of the rows.
/// Censored rows are all kept.
pub fn size_and_censoring(data: &SurvivalDataset, target_event_frac: f64, seed: u64) -> Result<Manipulated> {
    if check_event_target(data, target_event_frac)? {
        return Ok(Manipulated::identity(data));
    }
    let (events, censored) = indices_by_event(data);
    let keep = round_half_up(target_event_frac * censored.len() as f64 / (1.0 - target_event_frac))
        .min(events.len());
    let mut rng = rng_from_seed(seed);
    let mut rows = choose(&events, keep, &mut rng);
    rows.extend(censored);
    Ok(Manipulated::from_rows(data, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Midranks of the pooled sample and the tie-group sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for item in &pooled[i..j] {
            ranks[item.1] = mid;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn u_statistic(a: &[f64], ranks: &[f64]) -> f64 {
    let m = a.len() as f64;
    ranks[..a.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "rank-sum test needs two nonempty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in rank-sum sample".into()));
    }
    Ok(())
}

/// Null distribution of U: coefficient `u` of the Gaussian binomial
/// `[m+n choose m]_q`, built as `Π (1 − q^{n+i}) / (1 − q^i)`.
fn u_distribution(m: usize, n: usize) -> Vec<i128> {
    let (m, n) = if m <= n { (m, n) } else { (n, m) };
    let mut poly = vec![1i128];
    for i in 1..=m {
        let mut next = vec![0i128; poly.len() + n + i];
        next[..poly.len()].copy_from_slice(&poly);
        for k in (n + i..next.len()).rev() {
            next[k] -= next[k - n - i];
        }
        for k in i..next.len() {
            next[k] += next[k - i];
        }
        next.truncate(m.min(i) * n + 1);
        poly = next;
    }
    poly
}

/// Exact two-sided rank-sum test; requires no ties.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check_samples(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    if !ties.is_empty() {
        return Err(Error::InvalidArgument(
            "exact rank-sum test requires no ties".into(),
        ));
    }
    let u = u_statistic(a, &ranks);
    let dist = u_distribution(a.len(), b.len());
    let total: f64 = dist.iter().map(|&c| c as f64).sum();
    let k = u.round() as usize;
    let lower: f64 = dist[..=k].iter().map(|&c| c as f64).sum();
    let upper: f64 = dist[k..].iter().map(|&c| c as f64).sum();
    Ok(WilcoxonResult {
        u,
        p_value: (2.0 * lower.min(upper) / total).min(1.0),
        method: WilcoxonMethod::Exact,
    })
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check_samples(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let u = u_statistic(a, &ranks);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let big_n = m + n;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = if big_n > 1.0 {
        m * n / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)))
    } else {
        0.0
    };
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - m * n / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(WilcoxonResult {
        u,
        p_value,
        method: WilcoxonMethod::Normal,
    })
}

/// Two-sided Wilcoxon rank-sum test. Exact when the smaller sample has at
/// most 8 values and there are no ties, normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check_samples(a, b)?;
    let (_, ties) = pooled_ranks(a, b);
    if a.len().min(b.len()) <= 8 && ties.is_empty() {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Linear-interpolation quantile of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile_summary(vals: &[f64]) -> Result<QuantileSummary> {
    if vals.is_empty() {
        return Err(Error::InvalidArgument("quantiles of an empty sample".into()));
    }
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in quantile sample".into()));
    }
    let mut s = vals.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(QuantileSummary {
        median: quantile_sorted(&s, 0.5),
        q025: quantile_sorted(&s, 0.025),
        q975: quantile_sorted(&s, 0.975),
    })
}

/// Something that produces predictions for a generated dataset.
pub trait Predictor {
    fn name(&self) -> &str;

    /// Returns the evaluation set and its predictions.
    fn evaluate(&self, cell: &Manipulated, seed: u64) -> Result<(SurvivalDataset, Vec<f64>)>;
}

/// Fixed predictions aligned with the rows of the source dataset.
#[derive(Debug, Clone)]
pub struct FixedPredictions {
    pub name: String,
    pub values: Vec<f64>,
}

impl Predictor for FixedPredictions {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, cell: &Manipulated, _seed: u64) -> Result<(SurvivalDataset, Vec<f64>)> {
        let pred = cell
            .rows
            .iter()
            .map(|&r| {
                self.values.get(r).copied().ok_or(Error::LengthMismatch {
                    expected: r + 1,
                    actual: self.values.len(),
                })
            })
            .collect::<Result<_>>()?;
        Ok((cell.dataset.clone(), pred))
    }
}

/// Trains the encoder-decoder model on each generated dataset: hold out a
/// test share, fit preprocessing on the rest, split that 90/10 for early
/// stopping, and score the test share.
#[derive(Debug, Clone)]
pub struct SurvedPredictor {
    pub name: String,
    pub config: ModelConfig,
    pub holdout_frac: f64,
    pub train_frac: f64,
    pub power: f64,
}

impl Predictor for SurvedPredictor {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, cell: &Manipulated, seed: u64) -> Result<(SurvivalDataset, Vec<f64>)> {
        let data = &cell.dataset;
        let (pool, test) = holdout_indices(data.len(), self.holdout_frac, derive_seed(seed, &[0]))?;
        let fold = resample_folds(pool.len(), 1, self.train_frac, derive_seed(seed, &[1]))?.remove(0);
        let pick = |idx: &[usize]| data.subset(&idx.iter().map(|&i| pool[i]).collect::<Vec<_>>());
        let (train, val) = (pick(&fold.train), pick(&fold.validation));
        let plan = fit_preprocess(&train, self.power)?;
        let config = ModelConfig {
            input_dim: plan.output_width(),
            seed: derive_seed(seed, &[2]),
            ..self.config.clone()
        };
        let result = fit(
            SurvedModel::new(config)?,
            &apply_preprocess(&plan, &train)?,
            &apply_preprocess(&plan, &val)?,
            &FitOptions::default(),
        )?;
        let test_set = data.subset(&test);
        let pred = result
            .model
            .predict(&apply_preprocess(&plan, &test_set)?, derive_seed(seed, &[3]))?;
        Ok((test_set, pred))
    }
}

/// One (experiment, predictor, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub experiment: ExperimentKind,
    pub target: f64,
    pub predictor: String,
    pub fold: usize,
    pub n: usize,
    pub n_events: usize,
    pub event_fraction: f64,
    pub eval_n: usize,
    pub n_ee: u64,
    pub n_ec: u64,
    pub ci: f64,
    pub ci_ee: Option<f64>,
    pub ci_ec: Option<f64>,
    pub alpha: f64,
    pub alpha_star: f64,
    pub alpha_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub experiment: ExperimentKind,
    pub target: f64,
    pub predictor: String,
    pub folds: usize,
    pub n: QuantileSummary,
    pub event_fraction: QuantileSummary,
    pub ci: QuantileSummary,
    pub ci_ee: Option<QuantileSummary>,
    pub ci_ec: Option<QuantileSummary>,
    pub alpha: QuantileSummary,
    pub alpha_star: QuantileSummary,
    pub alpha_deviation: QuantileSummary,
    pub abs_alpha_deviation: QuantileSummary,
}

/// Seed for one grid cell, independent of evaluation order.
pub fn cell_seed(seed: u64, kind: ExperimentKind, target: f64, fold: usize) -> u64 {
    derive_seed(seed, &[kind.id(), target.to_bits(), fold as u64])
}

/// Runs every (spec, predictor, fold) cell. The generator seed of each cell
/// comes from [`cell_seed`]; `spec.seed` is ignored here.
pub fn run_experiment_grid(
    data: &SurvivalDataset,
    specs: &[ExperimentSpec],
    predictors: &[&dyn Predictor],
    folds: usize,
    seed: u64,
    conv: Comparability,
) -> Result<Vec<GridRow>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no experiment specs".into()));
    }
    if folds == 0 {
        return Err(Error::InvalidArgument("folds must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(specs.len() * predictors.len() * folds);
    for spec in specs {
        for fold in 0..folds {
            let s = cell_seed(seed, spec.kind, spec.target, fold);
            let cell = ExperimentSpec { seed: s, ..*spec }.generate(data)?;
            for p in predictors {
                let (eval, pred) = p.evaluate(&cell, derive_seed(s, &[0xE7A1]))?;
                let counts: PairCounts = count_pairs_fast(&eval, &pred, conv)?;
                let d: CIndexDecomposition = decompose(&counts)?;
                rows.push(GridRow {
                    experiment: spec.kind,
                    target: spec.target,
                    predictor: p.name().to_string(),
                    fold,
                    n: cell.dataset.len(),
                    n_events: cell.dataset.n_events(),
                    event_fraction: cell.dataset.event_fraction(),
                    eval_n: eval.len(),
                    n_ee: counts.n_ee,
                    n_ec: counts.n_ec,
                    ci: d.ci,
                    ci_ee: d.ci_ee,
                    ci_ec: d.ci_ec,
                    alpha: d.alpha,
                    alpha_star: d.alpha_star,
                    alpha_deviation: d.alpha_deviation,
                });
            }
        }
    }
    Ok(rows)
}

/// Per (experiment, target, predictor) quantiles, in first-seen order.
pub fn summarize_grid(rows: &[GridRow]) -> Result<Vec<GridSummary>> {
    let mut keys: Vec<(ExperimentKind, u64, String)> = Vec::new();
    for r in rows {
        let k = (r.experiment, r.target.to_bits(), r.predictor.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(kind, target_bits, predictor)| {
            let group: Vec<&GridRow> = rows
                .iter()
                .filter(|r| {
                    r.experiment == kind && r.target.to_bits() == target_bits && r.predictor == predictor
                })
                .collect();
            let q = |f: &dyn Fn(&GridRow) -> f64| {
                quantile_summary(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let q_opt = |f: &dyn Fn(&GridRow) -> Option<f64>| {
                let v: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    Ok(None)
                } else {
                    quantile_summary(&v).map(Some)
                }
            };
            Ok(GridSummary {
                experiment: kind,
                target: f64::from_bits(target_bits),
                predictor,
                folds: group.len(),
                n: q(&|r| r.n as f64)?,
                event_fraction: q(&|r| r.event_fraction)?,
                ci: q(&|r| r.ci)?,
                ci_ee: q_opt(&|r| r.ci_ee)?,
                ci_ec: q_opt(&|r| r.ci_ec)?,
                alpha: q(&|r| r.alpha)?,
                alpha_star: q(&|r| r.alpha_star)?,
                alpha_deviation: q(&|r| r.alpha_deviation)?,
                abs_alpha_deviation: q(&|r| r.alpha_deviation.abs())?,
            })
        })
        .collect()
}

pub fn write_grid_csv<W: std::io::Write>(rows: &[GridRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<grid csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ci,
    CiEe,
    CiEc,
    AbsAlphaDeviation,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ci, Metric::CiEe, Metric::CiEc, Metric::AbsAlphaDeviation];

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::AbsAlphaDeviation)
    }
}

/// Fold-level metrics of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFolds {
    pub name: String,
    /// fold id → metric values
    pub folds: BTreeMap<usize, BTreeMap<Metric, f64>>,
}

impl ModelFolds {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            folds: BTreeMap::new(),
        }
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.folds
            .values()
            .filter_map(|m| m.get(&metric).copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Lose,
    Draw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub model_a: String,
    pub model_b: String,
    pub metric: Metric,
    pub p_value: f64,
    pub significant: bool,
    /// From `model_a`'s side.
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub win: usize,
    pub lose: usize,
    pub draw: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub folds: usize,
    pub values: BTreeMap<Metric, Vec<f64>>,
    pub summary: BTreeMap<Metric, QuantileSummary>,
    pub tally: BTreeMap<Metric, Tally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub significance_level: f64,
    pub models: Vec<ModelReport>,
    pub comparisons: Vec<PairwiseComparison>,
}

/// Pairwise two-sided rank-sum tests on every metric. A significant
/// difference is a win for the model with the better median.
pub fn compare_models(models: &[ModelFolds], level: f64) -> Result<ComparisonSummary> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two models to compare".into(),
        ));
    }
    let fold_ids: BTreeSet<usize> = models[0].folds.keys().copied().collect();
    for m in models {
        let ids: BTreeSet<usize> = m.folds.keys().copied().collect();
        if ids != fold_ids {
            return Err(Error::InvalidArgument(format!(
                "model `{}` folds do not align with `{}`",
                m.name, models[0].name
            )));
        }
    }
    let metrics: Vec<Metric> = Metric::ALL
        .into_iter()
        .filter(|&mt| models.iter().all(|m| !m.values(mt).is_empty()))
        .collect();

    let mut reports: Vec<ModelReport> = models
        .iter()
        .map(|m| {
            let values: BTreeMap<Metric, Vec<f64>> = metrics.iter().map(|&mt| (mt, m.values(mt))).collect();
            let summary = values
                .iter()
                .map(|(&mt, v)| Ok((mt, quantile_summary(v)?)))
                .collect::<Result<_>>()?;
            Ok(ModelReport {
                name: m.name.clone(),
                folds: m.folds.len(),
                values,
                summary,
                tally: metrics.iter().map(|&mt| (mt, Tally::default())).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let mut comparisons = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            for &mt in &metrics {
                let (a, b) = (&reports[i].values[&mt], &reports[j].values[&mt]);
                let p = wilcoxon_rank_sum(a, b)?.p_value;
                let significant = p < level;
                let (ma, mb) = (reports[i].summary[&mt].median, reports[j].summary[&mt].median);
                let a_better = if mt.higher_is_better() { ma > mb } else { ma < mb };
                let outcome = if !significant || ma == mb {
                    Outcome::Draw
                } else if a_better {
                    Outcome::Win
                } else {
                    Outcome::Lose
                };
                let (ta, tb) = match outcome {
                    Outcome::Win => (Outcome::Win, Outcome::Lose),
                    Outcome::Lose => (Outcome::Lose, Outcome::Win),
                    Outcome::Draw => (Outcome::Draw, Outcome::Draw),
                };
                for (k, o) in [(i, ta), (j, tb)] {
                    let t = reports[k].tally.get_mut(&mt).unwrap();
                    match o {
                        Outcome::Win => t.win += 1,
                        Outcome::Lose => t.lose += 1,
                        Outcome::Draw => t.draw += 1,
                    }
                }
                comparisons.push(PairwiseComparison {
                    model_a: models[i].name.clone(),
                    model_b: models[j].name.clone(),
                    metric: mt,
                    p_value: p,
                    significant,
                    outcome,
                });
            }
        }
    }
    Ok(ComparisonSummary {
        significance_level: level,
        models: reports,
        comparisons,
    })
}

/// Reads fold-level results. Required column: `fold`. Optional metric
/// columns: `ci`, `ci_ee`, `ci_ec`, `alpha_deviation` (compared in absolute
/// value). Rows with a `predictor` column are split per predictor;
/// otherwise the whole file is one model named `default_name`.
pub fn load_fold_metrics(path: impl AsRef<Path>, default_name: &str) -> Result<Vec<ModelFolds>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let fold_col = col("fold").ok_or_else(|| Error::MissingColumn("fold".into()))?;
    let pred_col = col("predictor");
    let metric_cols: Vec<(Metric, usize)> = [
        (Metric::Ci, "ci"),
        (Metric::CiEe, "ci_ee"),
        (Metric::CiEc, "ci_ec"),
        (Metric::AbsAlphaDeviation, "alpha_deviation"),
    ]
    .into_iter()
    .filter_map(|(m, n)| col(n).map(|c| (m, c)))
    .collect();

    let mut models: Vec<ModelFolds> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let fold: usize = rec[fold_col].trim().parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("bad fold `{}`", &rec[fold_col]),
        })?;
        let name = pred_col.map_or(default_name, |c| rec[c].trim());
        let idx = match models.iter().position(|m| m.name == name) {
            Some(k) => k,
            None => {
                models.push(ModelFolds::new(name));
                models.len() - 1
            }
        };
        let mut values = BTreeMap::new();
        for &(m, c) in &metric_cols {
            let cell = rec[c].trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::MalformedRow {
                row,
                message: format!("bad value `{cell}`"),
            })?;
            values.insert(
                m,
                if m == Metric::AbsAlphaDeviation {
                    v.abs()
                } else {
                    v
                },
            );
        }
        if models[idx].folds.insert(fold, values).is_some() {
            return Err(Error::MalformedRow {
                row,
                message: format!("duplicate fold {fold} for `{name}`"),
            });
        }
    }
    Ok(models)
}
