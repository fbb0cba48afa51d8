use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use survdecomp::concordance::{count_pairs, decompose_rational, verify_identity, PairsMode};
use survdecomp::dataset::{apply_preprocess, fit_preprocess, holdout_indices, load_csv_with, CsvOptions};
use survdecomp::io::{read_predictions, write_atomic, write_predictions};
use survdecomp::kaplan_meier::km_estimate;
use survdecomp::lab::{
    compare_models, load_fold_metrics, run_experiment_grid, summarize_grid, write_grid_csv, ExperimentKind,
    ExperimentSpec, FixedPredictions, Predictor, SurvedPredictor,
};
use survdecomp::rng::derive_seed;
use survdecomp::surved::{fit, FitOptions};
use survdecomp::{synth, Comparability, LossWeights, ModelConfig, SurvedModel, SurvivalDataset};

use crate::config::resolve;
use crate::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

/// Prints the report and, when `output` is set, also writes it there.
fn emit(report: &Value, output: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(report).map_err(input)? + "\n";
    if let Some(path) = output {
        write_atomic(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn pairs_mode(s: &str) -> CliResult<PairsMode> {
    Ok(s.parse::<PairsMode>()?)
}

fn conv(tied_event_censored: bool) -> Comparability {
    Comparability { tied_event_censored }
}

// ---------------------------------------------------------------- shared

#[derive(Args, Debug, Serialize)]
pub struct DataFlags {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the time column [default: time].
    #[arg(long)]
    time_col: Option<String>,
    /// Name of the event indicator column (1/0 or true/false) [default: event].
    #[arg(long)]
    event_col: Option<String>,
    /// Columns read as categorical even when numeric (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    categorical: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    data: Option<PathBuf>,
    time_col: String,
    event_col: String,
    categorical: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            data: None,
            time_col: "time".into(),
            event_col: "event".into(),
            categorical: Vec::new(),
        }
    }
}

impl DataConfig {
    fn load(&self) -> CliResult<SurvivalDataset> {
        let path = self.data.as_ref().ok_or_else(|| input("--data is required"))?;
        let opts = CsvOptions {
            categorical: self.categorical.clone(),
        };
        Ok(load_csv_with(path, &self.time_col, &self.event_col, &opts)?)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ModelFlags {
    /// Hidden layer widths (comma separated) [default: 32,32].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    hidden: Vec<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Latent draws per subject when predicting.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Maximum number of epochs; 0 keeps the initial weights.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    lambda_kl: Option<f64>,
    #[arg(long)]
    lambda_lb: Option<f64>,
    /// Exponent of the time transform `(t / max t)^p`.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelKnobs {
    hidden: Vec<usize>,
    latent_dim: usize,
    n_samples: usize,
    epochs: usize,
    patience: usize,
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    lambda_e: f64,
    lambda_c: f64,
    lambda_kl: f64,
    lambda_lb: f64,
    power: f64,
}

impl Default for ModelKnobs {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            hidden: m.hidden_widths,
            latent_dim: m.latent_dim,
            n_samples: m.n_samples,
            epochs: m.max_epochs,
            patience: m.patience,
            learning_rate: m.learning_rate,
            momentum: m.momentum,
            batch_size: m.batch_size,
            lambda_e: m.weights.lambda_e,
            lambda_c: m.weights.lambda_c,
            lambda_kl: m.weights.lambda_kl,
            lambda_lb: m.weights.lambda_lb,
            power: 0.5,
        }
    }
}

impl ModelKnobs {
    fn model_config(
        &self,
        input_dim: usize,
        seed: u64,
        comparability: Comparability,
    ) -> CliResult<ModelConfig> {
        let c = ModelConfig {
            input_dim,
            hidden_widths: self.hidden.clone(),
            latent_dim: self.latent_dim,
            n_samples: self.n_samples,
            weights: LossWeights {
                lambda_e: self.lambda_e,
                lambda_c: self.lambda_c,
                lambda_kl: self.lambda_kl,
                lambda_lb: self.lambda_lb,
            },
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            seed,
            first_layer_dropout: 0.0,
            comparability,
        };
        c.validate()?;
        Ok(c)
    }
}

// ---------------------------------------------------------------- decompose

#[derive(Args, Debug, Serialize)]
pub struct DecomposeArgs {
    /// Config file (JSON object or key = value lines); flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataFlags,
    /// Predicted event times, one per line, or a CSV with an `id` column.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Pair counting algorithm [default: fast].
    #[arg(long, value_parser = ["exact", "fast"])]
    pairs_mode: Option<String>,
    /// Count an event and a censoring at the same time as a comparable pair [default: true].
    #[arg(long)]
    tied_event_censored: Option<bool>,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct DecomposeConfig {
    #[serde(flatten)]
    data: DataConfig,
    predictions: Option<PathBuf>,
    pairs_mode: String,
    tied_event_censored: bool,
    output: Option<PathBuf>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            predictions: None,
            pairs_mode: "fast".into(),
            tied_event_censored: true,
            output: None,
        }
    }
}

fn decomposition_report(
    data: &SurvivalDataset,
    pred: &[f64],
    mode: PairsMode,
    c: Comparability,
) -> CliResult<Value> {
    let counts = count_pairs(data, pred, mode, c)?;
    let exact = decompose_rational(&counts)?;
    let d = exact.to_f64();
    let residual = verify_identity(&d).ok();
    let fmt = |r: &survdecomp::concordance::Rational| r.to_string();
    Ok(json!({
        "n": data.len(),
        "n_events": data.n_events(),
        "counts": counts,
        "decomposition": d,
        "exact": {
            "ci": fmt(&exact.ci),
            "ci_ee": exact.ci_ee.as_ref().map(fmt),
            "ci_ec": exact.ci_ec.as_ref().map(fmt),
            "alpha": fmt(&exact.alpha),
            "alpha_star": fmt(&exact.alpha_star),
            "alpha_deviation": fmt(&exact.alpha_deviation),
        },
        "identity_residual": residual,
    }))
}

pub fn decompose(args: DecomposeArgs) -> CliResult {
    let cfg: DecomposeConfig = resolve(args.config.as_deref(), &args)?;
    let data = cfg.data.load()?;
    let path = cfg
        .predictions
        .as_ref()
        .ok_or_else(|| input("--predictions is required"))?;
    let pred = read_predictions(path)?;
    let mut report = decomposition_report(
        &data,
        &pred,
        pairs_mode(&cfg.pairs_mode)?,
        conv(cfg.tied_event_censored),
    )?;
    report["command"] = json!("decompose");
    report["config"] = serde_json::to_value(&cfg).map_err(input)?;
    emit(&report, cfg.output.as_deref())
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Config file (JSON object or key = value lines); flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataFlags,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    /// Share of rows held out for early stopping [default: 0.1].
    #[arg(long)]
    validation_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pair counting algorithm for the reported C-index [default: fast].
    #[arg(long, value_parser = ["exact", "fast"])]
    pairs_mode: Option<String>,
    /// Count an event and a censoring at the same time as a comparable pair [default: true].
    #[arg(long)]
    tied_event_censored: Option<bool>,
    /// Directory for checkpoint.json, predictions.txt, train_log.jsonl and report.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TrainConfig {
    #[serde(flatten)]
    data: DataConfig,
    #[serde(flatten)]
    model: ModelKnobs,
    validation_frac: f64,
    seed: u64,
    pairs_mode: String,
    tied_event_censored: bool,
    out_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            model: ModelKnobs::default(),
            validation_frac: 0.1,
            seed: 0,
            pairs_mode: "fast".into(),
            tied_event_censored: true,
            out_dir: PathBuf::from("survdecomp-train"),
        }
    }
}

pub fn train(args: TrainArgs) -> CliResult {
    let cfg: TrainConfig = resolve(args.config.as_deref(), &args)?;
    let mode = pairs_mode(&cfg.pairs_mode)?;
    let comparability = conv(cfg.tied_event_censored);
    let data = cfg.data.load()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| input(format!("{}: {e}", cfg.out_dir.display())))?;

    let (train_idx, val_idx) = holdout_indices(data.len(), cfg.validation_frac, derive_seed(cfg.seed, &[1]))?;
    let train = data.subset(&train_idx);
    let val = data.subset(&val_idx);
    let plan = fit_preprocess(&train, cfg.model.power)?;
    let model_cfg = cfg
        .model
        .model_config(plan.output_width(), cfg.seed, comparability)?;
    let opts = FitOptions {
        dump_path: Some(cfg.out_dir.join("divergence.json")),
    };
    let result = fit(
        SurvedModel::new(model_cfg)?,
        &apply_preprocess(&plan, &train)?,
        &apply_preprocess(&plan, &val)?,
        &opts,
    )?;

    let scaled = result
        .model
        .predict(&apply_preprocess(&plan, &data)?, derive_seed(cfg.seed, &[2]))?;
    let pred: Vec<f64> = scaled.iter().map(|&t| plan.inverse_time(t)).collect();

    let checkpoint = json!({ "model": result.model.to_checkpoint(), "preprocess": plan });
    let checkpoint_path = cfg.out_dir.join("checkpoint.json");
    let predictions_path = cfg.out_dir.join("predictions.txt");
    let log_path = cfg.out_dir.join("train_log.jsonl");
    write_atomic(
        &checkpoint_path,
        serde_json::to_string_pretty(&checkpoint)
            .map_err(input)?
            .as_bytes(),
    )?;
    write_predictions(&predictions_path, &pred)?;
    let mut log = String::new();
    for epoch in &result.history {
        log.push_str(&serde_json::to_string(epoch).map_err(input)?);
        log.push('\n');
    }
    write_atomic(&log_path, log.as_bytes())?;

    // read back so the figure matches what `decompose` sees on the same file
    let emitted = read_predictions(&predictions_path)?;
    let mut report = decomposition_report(&data, &emitted, mode, comparability)?;
    report["command"] = json!("train");
    report["config"] = serde_json::to_value(&cfg).map_err(input)?;
    report["n_train"] = json!(train.len());
    report["n_validation"] = json!(val.len());
    report["epochs_run"] = json!(result.history.len());
    report["best_epoch"] = json!(result.best_epoch);
    report["best_validation_ci"] = json!(result.best_validation_ci);
    report["ci"] = report["decomposition"]["ci"].clone();
    report["files"] = json!({
        "checkpoint": checkpoint_path,
        "predictions": predictions_path,
        "log": log_path,
    });
    emit(&report, Some(&cfg.out_dir.join("report.json")))
}

// ---------------------------------------------------------------- lab

#[derive(Args, Debug, Serialize)]
pub struct LabArgs {
    /// Config file (JSON object or key = value lines); flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataFlags,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    /// Use generated data instead of --data: `support` (6201 events, 2904
    /// censored) or `nonlinear` (2000 rows, 30% censored).
    #[arg(long, value_parser = ["support", "nonlinear"])]
    synthetic: Option<String>,
    /// Experiment kinds: size_only, censoring_only, size_and_censoring [default: size_and_censoring].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    experiments: Vec<String>,
    /// Targets: event fractions, or the kept share of rows for size_only.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    targets: Vec<f64>,
    /// Resampled repetitions per grid cell [default: 5].
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predictors: `surved`, `constant`, `oracle` (synthetic data only) or
    /// `NAME=PATH` for fixed predictions aligned with the input rows
    /// [default: surved].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    predictors: Vec<String>,
    /// Test share held out of each generated dataset for `surved` [default: 0.2].
    #[arg(long)]
    holdout_frac: Option<f64>,
    /// Training share of the remaining pool for `surved` [default: 0.9].
    #[arg(long)]
    train_frac: Option<f64>,
    /// Count an event and a censoring at the same time as a comparable pair [default: true].
    #[arg(long)]
    tied_event_censored: Option<bool>,
    /// Directory for grid.csv and summary.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct LabConfig {
    #[serde(flatten)]
    data: DataConfig,
    #[serde(flatten)]
    model: ModelKnobs,
    synthetic: Option<String>,
    experiments: Vec<String>,
    targets: Vec<f64>,
    folds: usize,
    seed: u64,
    predictors: Vec<String>,
    holdout_frac: f64,
    train_frac: f64,
    tied_event_censored: bool,
    out_dir: PathBuf,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            model: ModelKnobs::default(),
            synthetic: None,
            experiments: vec!["size_and_censoring".into()],
            targets: Vec::new(),
            folds: 5,
            seed: 0,
            predictors: vec!["surved".into()],
            holdout_frac: 0.2,
            train_frac: 0.9,
            tied_event_censored: true,
            out_dir: PathBuf::from("survdecomp-lab"),
        }
    }
}

struct ConstantPredictor;

impl Predictor for ConstantPredictor {
    fn name(&self) -> &str {
        "constant"
    }

    fn evaluate(
        &self,
        cell: &survdecomp::lab::Manipulated,
        _seed: u64,
    ) -> survdecomp::Result<(SurvivalDataset, Vec<f64>)> {
        Ok((cell.dataset.clone(), vec![0.0; cell.dataset.len()]))
    }
}

pub fn lab(args: LabArgs) -> CliResult {
    let cfg: LabConfig = resolve(args.config.as_deref(), &args)?;
    let comparability = conv(cfg.tied_event_censored);
    let (data, latent) = match cfg.synthetic.as_deref() {
        Some("support") => {
            let s = synth::support_shaped(cfg.seed)?;
            (s.dataset, Some(s.latent_times))
        }
        Some("nonlinear") => {
            let s = synth::nonlinear(2000, 0.3, cfg.seed)?;
            (s.dataset, Some(s.latent_times))
        }
        Some(other) => return Err(input(format!("unknown synthetic dataset `{other}`"))),
        None => (cfg.data.load()?, None),
    };

    let mut specs = Vec::new();
    for kind in &cfg.experiments {
        let kind: ExperimentKind = kind.parse()?;
        for &target in &cfg.targets {
            specs.push(ExperimentSpec::new(kind, target, cfg.seed)?);
        }
    }
    if specs.is_empty() {
        return Err(input(
            "no experiment specs: give at least one of --experiments and --targets",
        ));
    }

    let mut predictors: Vec<Box<dyn Predictor>> = Vec::new();
    for p in &cfg.predictors {
        let boxed: Box<dyn Predictor> = match p.as_str() {
            "surved" => Box::new(SurvedPredictor {
                name: "surved".into(),
                // input width and seed are set per cell
                config: cfg.model.model_config(1, 0, comparability)?,
                holdout_frac: cfg.holdout_frac,
                train_frac: cfg.train_frac,
                power: cfg.model.power,
            }),
            "constant" => Box::new(ConstantPredictor),
            "oracle" => Box::new(FixedPredictions {
                name: "oracle".into(),
                values: latent
                    .clone()
                    .ok_or_else(|| input("the oracle predictor needs --synthetic data"))?,
            }),
            spec => {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| input(format!("unknown predictor `{spec}`")))?;
                let values = read_predictions(path)?;
                if values.len() != data.len() {
                    return Err(survdecomp::Error::LengthMismatch {
                        expected: data.len(),
                        actual: values.len(),
                    }
                    .into());
                }
                Box::new(FixedPredictions {
                    name: name.into(),
                    values,
                })
            }
        };
        predictors.push(boxed);
    }
    let refs: Vec<&dyn Predictor> = predictors.iter().map(|b| b.as_ref()).collect();

    let rows = run_experiment_grid(&data, &specs, &refs, cfg.folds, cfg.seed, comparability)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| input(format!("{}: {e}", cfg.out_dir.display())))?;
    let mut csv = Vec::new();
    write_grid_csv(&rows, &mut csv)?;
    let grid_path = cfg.out_dir.join("grid.csv");
    write_atomic(&grid_path, &csv)?;

    let report = json!({
        "command": "lab",
        "config": cfg,
        "n": data.len(),
        "n_events": data.n_events(),
        "rows": rows.len(),
        "grid": grid_path,
        "cells": summarize_grid(&rows)?,
    });
    emit(&report, Some(&cfg.out_dir.join("summary.json")))
}

// ---------------------------------------------------------------- compare

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    /// Config file (JSON object or key = value lines); flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Fold-level CSVs with a `fold` column, metric columns (`ci`, `ci_ee`,
    /// `ci_ec`, `alpha_deviation`) and optionally `predictor`. Files without
    /// a `predictor` column are named after the file.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<PathBuf>,
    /// Significance level of the two-sided rank-sum tests [default: 0.05].
    #[arg(long)]
    level: Option<f64>,
    /// Also write the report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CompareConfig {
    inputs: Vec<PathBuf>,
    level: f64,
    output: Option<PathBuf>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            level: 0.05,
            output: None,
        }
    }
}

pub fn compare(args: CompareArgs) -> CliResult {
    let cfg: CompareConfig = resolve(args.config.as_deref(), &args)?;
    let mut models = Vec::new();
    for path in &cfg.inputs {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for m in load_fold_metrics(path, &stem)? {
            if models
                .iter()
                .any(|o: &survdecomp::lab::ModelFolds| o.name == m.name)
            {
                return Err(input(format!("model `{}` appears more than once", m.name)));
            }
            models.push(m);
        }
    }
    if models.len() < 2 {
        return Err(input(format!("need at least two models, found {}", models.len())));
    }
    let summary = compare_models(&models, cfg.level)?;
    let report = json!({ "command": "compare", "config": cfg, "comparison": summary });
    emit(&report, cfg.output.as_deref())
}

// ---------------------------------------------------------------- km

#[derive(Args, Debug, Serialize)]
pub struct KmArgs {
    /// Config file (JSON object or key = value lines); flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataFlags,
    /// Write the curve as `time,survival` CSV here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct KmConfig {
    #[serde(flatten)]
    data: DataConfig,
    output: Option<PathBuf>,
}

pub fn km(args: KmArgs) -> CliResult {
    let cfg: KmConfig = resolve(args.config.as_deref(), &args)?;
    let data = cfg.data.load()?;
    let curve = km_estimate(&data.times(), &data.events())?;
    if let Some(path) = &cfg.output {
        let mut csv = Vec::new();
        curve.write_csv(&mut csv).map_err(input)?;
        write_atomic(path, &csv)?;
    }
    let median = curve
        .times
        .iter()
        .zip(&curve.probs)
        .find(|(_, &p)| p <= 0.5)
        .map(|(&t, _)| t);
    let report = json!({
        "command": "km",
        "config": cfg,
        "n": data.len(),
        "n_events": data.n_events(),
        "median_survival": median,
        "curve": { "times": curve.times, "survival": curve.probs },
    });
    emit(&report, None)
}
