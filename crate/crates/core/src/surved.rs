//! Variational encoder-decoder survival model.
//!
//! The encoder maps covariates through tanh hidden layers to the mean and
//! log-variance of a diagonal Gaussian latent. A single linear layer decodes
//! a latent sample to a time. Drawing many latent samples for one subject
//! gives an empirical event-time distribution; its mean is the point
//! prediction and its Kaplan-Meier curve the survival function.
//!
//! Gradients are derived by hand and flow through the reparameterized
//! sample `z = μ + exp(log_var / 2) ⊙ ε`.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::concordance::{c_index, Comparability};
use crate::dataset::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::kaplan_meier::{km_estimate, StepSurvival};
use crate::losses::{comparable_pairs, GaussianLatent, LossBatch, LossBreakdown, LossWeights};
use crate::rng::{derive_seed, rng_from_seed, Rng};

const SEED_INIT: u64 = 1;
const SEED_TRAIN: u64 = 2;
const SEED_EVAL: u64 = 3;

pub const CHECKPOINT_FORMAT: &str = "survdecomp-surved";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub latent_dim: usize,
    /// Latent draws per subject at inference.
    pub n_samples: usize,
    pub weights: LossWeights,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain SGD.
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Not implemented; must stay 0.
    pub first_layer_dropout: f64,
    pub comparability: Comparability,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden_widths: vec![32, 32],
            latent_dim: 4,
            n_samples: 200,
            weights: LossWeights::default(),
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            first_layer_dropout: 0.0,
            comparability: Comparability::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.input_dim == 0 || self.latent_dim == 0 || self.hidden_widths.contains(&0) {
            return bad(format!(
                "dimensions must be >= 1 (input {}, hidden {:?}, latent {})",
                self.input_dim, self.hidden_widths, self.latent_dim
            ));
        }
        if self.n_samples == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("n_samples, patience and batch_size must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.first_layer_dropout != 0.0 {
            return bad("dropout is not supported; set first_layer_dropout = 0".into());
        }
        self.weights.validate()
    }
}

/// Fully connected layer, weights row-major `(outputs × inputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..=limit);
        }
        layer
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns ∂/∂input.
    fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut d_in = vec![0.0; self.inputs];
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                d_in[i] += g * row[i];
            }
        }
        d_in
    }
}

/// Every trainable parameter. Also used for gradients and momentum buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub hidden: Vec<Dense>,
    pub mu_head: Dense,
    pub log_var_head: Dense,
    /// latent → scalar time
    pub decoder: Dense,
}

impl Params {
    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden
            .iter()
            .chain([&self.mu_head, &self.log_var_head, &self.decoder])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .chain([&mut self.mu_head, &mut self.log_var_head, &mut self.decoder])
    }

    /// Weight and bias slices in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &Dense| Dense::zeros(l.inputs, l.outputs);
        Self {
            hidden: self.hidden.iter().map(z).collect(),
            mu_head: z(&self.mu_head),
            log_var_head: z(&self.log_var_head),
            decoder: z(&self.decoder),
        }
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Per-subject activations kept for the backward pass.
struct Trace {
    /// input followed by each hidden activation
    activations: Vec<Vec<f64>>,
    latent: GaussianLatent,
    z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvedModel {
    pub params: Params,
    pub config: ModelConfig,
    #[serde(skip)]
    velocity: Option<Params>,
}

impl SurvedModel {
    /// Randomly initialized model.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(derive_seed(config.seed, &[SEED_INIT]));
        let mut hidden = Vec::with_capacity(config.hidden_widths.len());
        let mut width = config.input_dim;
        for &h in &config.hidden_widths {
            hidden.push(Dense::glorot(width, h, &mut rng));
            width = h;
        }
        let params = Params {
            hidden,
            mu_head: Dense::glorot(width, config.latent_dim, &mut rng),
            log_var_head: Dense::glorot(width, config.latent_dim, &mut rng),
            decoder: Dense::glorot(config.latent_dim, 1, &mut rng),
        };
        Ok(Self {
            params,
            config,
            velocity: None,
        })
    }

    /// Model with every weight and bias set to zero.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        let mut m = Self::new(config)?;
        for s in m.params.slices_mut() {
            s.fill(0.0);
        }
        Ok(m)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::LengthMismatch {
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariate".into()));
        }
        Ok(())
    }

    fn encode_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, GaussianLatent) {
        let mut activations = Vec::with_capacity(self.params.hidden.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.params.hidden {
            let mut h = layer.forward(activations.last().unwrap());
            h.iter_mut().for_each(|v| *v = v.tanh());
            activations.push(h);
        }
        let top = activations.last().unwrap();
        let latent = GaussianLatent {
            mu: self.params.mu_head.forward(top),
            log_var: self.params.log_var_head.forward(top),
        };
        (activations, latent)
    }

    /// Deterministic encoder pass.
    pub fn encode(&self, x: &[f64]) -> Result<GaussianLatent> {
        self.check_input(x)?;
        Ok(self.encode_trace(x).1)
    }

    /// Raw linear decoder output, no clamping.
    pub fn decode(&self, z: &[f64]) -> f64 {
        self.params.decoder.forward(z)[0]
    }

    fn draw_noise(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.config.latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect()
    }

    /// `n` decoded latent draws, clamped at 0.
    pub fn sample_event_times(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let latent = self.encode(x)?;
        Ok((0..n)
            .map(|_| {
                let eps = self.draw_noise(rng);
                self.decode(&reparameterize(&latent, &eps)).max(0.0)
            })
            .collect())
    }

    /// Monte-Carlo mean of the sampled times.
    pub fn expected_event_time(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<f64> {
        let s = self.sample_event_times(x, n, rng)?;
        // shifted mean: exact when all samples are equal
        let first = s[0];
        Ok(first + s.iter().map(|v| v - first).sum::<f64>() / n as f64)
    }

    /// Kaplan-Meier curve over `n` sampled times, all treated as events.
    pub fn survival_function(&self, x: &[f64], n: usize, rng: &mut Rng) -> Result<StepSurvival> {
        let s = self.sample_event_times(x, n, rng)?;
        km_estimate(&s, &vec![true; s.len()])
    }

    /// Expected times for every row, using `config.n_samples` draws each.
    /// Row `k` uses a noise stream derived from `(seed, k)`.
    pub fn predict(&self, data: &SurvivalDataset, seed: u64) -> Result<Vec<f64>> {
        data.records
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut rng = rng_from_seed(derive_seed(seed, &[k as u64]));
                self.expected_event_time(&r.covariates, self.config.n_samples, &mut rng)
            })
            .collect()
    }

    /// Loss on a batch with caller-supplied noise (one row of `eps` per record).
    pub fn batch_loss(&self, batch: &[SurvivalRecord], eps: &[Vec<f64>]) -> Result<LossBreakdown> {
        let (traces, pred) = self.forward_batch(batch, eps)?;
        let latents: Vec<GaussianLatent> = traces.into_iter().map(|t| t.latent).collect();
        let (times, events) = targets(batch);
        let pairs = comparable_pairs(&times, &events, self.config.comparability);
        LossBatch {
            pred: &pred,
            times: &times,
            events: &events,
            latents: &latents,
            pairs: &pairs,
        }
        .loss(&self.config.weights)
    }

    fn forward_batch(&self, batch: &[SurvivalRecord], eps: &[Vec<f64>]) -> Result<(Vec<Trace>, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if eps.len() != batch.len() {
            return Err(Error::LengthMismatch {
                expected: batch.len(),
                actual: eps.len(),
            });
        }
        let mut traces = Vec::with_capacity(batch.len());
        let mut pred = Vec::with_capacity(batch.len());
        for (r, e) in batch.iter().zip(eps) {
            self.check_input(&r.covariates)?;
            if e.len() != self.config.latent_dim {
                return Err(Error::LengthMismatch {
                    expected: self.config.latent_dim,
                    actual: e.len(),
                });
            }
            let (activations, latent) = self.encode_trace(&r.covariates);
            let z = reparameterize(&latent, e);
            pred.push(self.decode(&z));
            traces.push(Trace {
                activations,
                latent,
                z,
            });
        }
        Ok((traces, pred))
    }

    /// Loss and parameter gradients on a batch with fixed noise.
    pub fn loss_and_gradients(
        &self,
        batch: &[SurvivalRecord],
        eps: &[Vec<f64>],
    ) -> Result<(LossBreakdown, Params)> {
        let (traces, pred) = self.forward_batch(batch, eps)?;
        let latents: Vec<GaussianLatent> = traces.iter().map(|t| t.latent.clone()).collect();
        let (times, events) = targets(batch);
        let pairs = comparable_pairs(&times, &events, self.config.comparability);
        let lg = LossBatch {
            pred: &pred,
            times: &times,
            events: &events,
            latents: &latents,
            pairs: &pairs,
        }
        .gradients(&self.config.weights)?;

        let p = &self.params;
        let mut grad = p.zeros_like();
        for (k, trace) in traces.iter().enumerate() {
            let d_z = p.decoder.backward(&trace.z, &[lg.d_pred[k]], &mut grad.decoder);
            let d_mu: Vec<f64> = d_z.iter().zip(&lg.d_mu[k]).map(|(a, b)| a + b).collect();
            let d_log_var: Vec<f64> = (0..d_z.len())
                .map(|d| {
                    let sd = (0.5 * trace.latent.log_var[d]).exp();
                    d_z[d] * eps[k][d] * 0.5 * sd + lg.d_log_var[k][d]
                })
                .collect();
            let top = trace.activations.last().unwrap();
            let mut d_h = p.mu_head.backward(top, &d_mu, &mut grad.mu_head);
            let d_h2 = p.log_var_head.backward(top, &d_log_var, &mut grad.log_var_head);
            d_h.iter_mut().zip(d_h2).for_each(|(a, b)| *a += b);
            for l in (0..p.hidden.len()).rev() {
                let h = &trace.activations[l + 1];
                let d_pre: Vec<f64> = d_h.iter().zip(h).map(|(g, a)| g * (1.0 - a * a)).collect();
                d_h = p.hidden[l].backward(&trace.activations[l], &d_pre, &mut grad.hidden[l]);
            }
        }
        Ok((lg.breakdown, grad))
    }

    /// One SGD/momentum update on `batch`, one latent draw per subject.
    pub fn train_step(&mut self, batch: &[SurvivalRecord], rng: &mut Rng) -> Result<LossBreakdown> {
        let eps: Vec<Vec<f64>> = batch.iter().map(|_| self.draw_noise(rng)).collect();
        let (loss, grad) = self.loss_and_gradients(batch, &eps)?;
        if !loss.total.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss:?}")));
        }
        let lr = self.config.learning_rate;
        let momentum = self.config.momentum;
        let velocity = self.velocity.get_or_insert_with(|| self.params.zeros_like());
        for ((p, v), g) in self
            .params
            .slices_mut()
            .into_iter()
            .zip(velocity.slices_mut())
            .zip(grad.slices())
        {
            for i in 0..p.len() {
                v[i] = momentum * v[i] + g[i];
                p[i] -= lr * v[i];
            }
        }
        if !self.params.is_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        c.config.validate()?;
        let shape_ok = {
            let reference = Self::new(c.config.clone())?;
            reference.params.layers().zip(c.params.layers()).all(|(a, b)| {
                (a.inputs, a.outputs) == (b.inputs, b.outputs)
                    && b.weights.len() == b.inputs * b.outputs
                    && b.bias.len() == b.outputs
            }) && reference.params.hidden.len() == c.params.hidden.len()
        };
        if !shape_ok {
            return Err(Error::SchemaMismatch(
                "checkpoint shapes disagree with config".into(),
            ));
        }
        Ok(Self {
            params: c.params,
            config: c.config,
            velocity: None,
        })
    }
}

/// Serialized model: config plus flat weight arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Params,
}

fn targets(batch: &[SurvivalRecord]) -> (Vec<f64>, Vec<bool>) {
    (
        batch.iter().map(|r| r.time).collect(),
        batch.iter().map(|r| r.event).collect(),
    )
}

/// `z = μ + exp(log_var / 2) ⊙ ε`.
pub fn reparameterize(latent: &GaussianLatent, eps: &[f64]) -> Vec<f64> {
    latent
        .mu
        .iter()
        .zip(&latent.log_var)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation_ci: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Weights from the best validation epoch (initial weights if no epoch ran).
    pub model: SurvedModel,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_validation_ci: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Where to write the model state if training produces non-finite values.
    pub dump_path: Option<PathBuf>,
}

#[derive(Serialize)]
struct DivergenceDump<'a> {
    epoch: usize,
    step: usize,
    message: String,
    checkpoint: Checkpoint,
    batch_rows: &'a [usize],
}

/// Trains with early stopping on validation C-index. Validation predictions
/// use a fixed noise stream so an unchanged model scores identically.
pub fn fit(
    model: SurvedModel,
    train: &SurvivalDataset,
    validation: &SurvivalDataset,
    opts: &FitOptions,
) -> Result<FitResult> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InvalidArgument(
            "train and validation sets must be nonempty".into(),
        ));
    }
    let cfg = model.config.clone();
    crate::concordance::comparable_totals(validation, cfg.comparability)?;

    let eval_seed = derive_seed(cfg.seed, &[SEED_EVAL]);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[SEED_TRAIN]));
    let mut current = model;
    let mut best = current.clone();
    let mut best_ci: Option<f64> = None;
    let mut best_epoch = None;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut n_batches = 0usize;
        for (step, rows) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<SurvivalRecord> = rows.iter().map(|&i| train.records[i].clone()).collect();
            let loss = match current.train_step(&batch, &mut rng) {
                Ok(l) => l,
                Err(Error::NonFinite(message)) => {
                    let dump = match &opts.dump_path {
                        Some(path) => {
                            write_dump(path, epoch, step, &message, &current, rows)?;
                            Some(path.clone())
                        }
                        None => None,
                    };
                    return Err(Error::TrainingDiverged {
                        epoch,
                        step,
                        message,
                        dump,
                    });
                }
                Err(e) => return Err(e),
            };
            sum.l_e += loss.l_e;
            sum.l_c += loss.l_c;
            sum.l_kl += loss.l_kl;
            sum.c_lb += loss.c_lb;
            sum.total += loss.total;
            n_batches += 1;
        }
        let k = n_batches as f64;
        let mean = LossBreakdown {
            l_e: sum.l_e / k,
            l_c: sum.l_c / k,
            l_kl: sum.l_kl / k,
            c_lb: sum.c_lb / k,
            total: sum.total / k,
        };

        let ci = c_index(validation, &current.predict(validation, eval_seed)?)?;
        let improved = best_ci.is_none_or(|b| ci > b);
        history.push(EpochLog {
            epoch,
            train: mean,
            validation_ci: ci,
            improved,
        });
        if improved {
            best_ci = Some(ci);
            best_epoch = Some(epoch);
            best = current.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    best.velocity = None;
    Ok(FitResult {
        model: best,
        history,
        best_epoch,
        best_validation_ci: best_ci,
    })
}

fn write_dump(
    path: &Path,
    epoch: usize,
    step: usize,
    message: &str,
    model: &SurvedModel,
    rows: &[usize],
) -> Result<()> {
    let dump = DivergenceDump {
        epoch,
        step,
        message: message.to_string(),
        checkpoint: model.to_checkpoint(),
        batch_rows: rows,
    };
    write_atomic(path, serde_json::to_string_pretty(&dump)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_dim: 1,
            hidden_widths: vec![1],
            latent_dim: 1,
            ..Default::default()
        }
    }

    #[test]
    fn zero_network_encodes_to_prior() {
        let m = SurvedModel::zeroed(ModelConfig {
            input_dim: 3,
            ..Default::default()
        })
        .unwrap();
        let lat = m.encode(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(lat, GaussianLatent::standard(4));
    }

    #[test]
    fn hand_forward_pass() {
        let mut m = SurvedModel::zeroed(tiny_config()).unwrap();
        m.params.hidden[0].weights[0] = 1.0;
        m.params.mu_head.weights[0] = 0.7;
        m.params.log_var_head.weights[0] = -0.4;
        let lat = m.encode(&[1.0]).unwrap();
        assert_eq!(lat.mu[0], 1f64.tanh() * 0.7);
        assert_eq!(lat.log_var[0], 1f64.tanh() * -0.4);
        assert_eq!(lat, m.encode(&[1.0]).unwrap());
    }

    #[test]
    fn encode_rejects_bad_input() {
        let m = SurvedModel::new(tiny_config()).unwrap();
        assert!(matches!(m.encode(&[f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(m.encode(&[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn reparameterize_examples() {
        let unit = GaussianLatent::standard(1);
        assert_eq!(reparameterize(&unit, &[0.3]), vec![0.3]);
        let lat = GaussianLatent {
            mu: vec![1.0, -2.0],
            log_var: vec![4f64.ln(), 0.5],
        };
        assert_eq!(reparameterize(&lat, &[0.0, 0.0]), lat.mu);
        let lat = GaussianLatent {
            mu: vec![1.0],
            log_var: vec![4f64.ln()],
        };
        assert!((reparameterize(&lat, &[1.0])[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_decoder_samples() {
        let mut m = SurvedModel::new(tiny_config()).unwrap();
        m.params.decoder.weights.fill(0.0);
        m.params.decoder.bias[0] = 0.7;
        let mut rng = rng_from_seed(5);
        let s = m.sample_event_times(&[0.2], 50, &mut rng).unwrap();
        assert!(s.iter().all(|&v| v == 0.7));
        assert_eq!(m.expected_event_time(&[0.2], 50, &mut rng).unwrap(), 0.7);
        let curve = m.survival_function(&[0.2], 50, &mut rng).unwrap();
        assert_eq!(curve.times, vec![0.7]);
        assert_eq!(curve.probs, vec![0.0]);
        assert!(m.sample_event_times(&[0.2], 0, &mut rng).is_err());
    }

    #[test]
    fn collapsed_variance_gives_decoded_mean() {
        let mut m = SurvedModel::new(tiny_config()).unwrap();
        m.params.log_var_head.weights.fill(0.0);
        m.params.log_var_head.bias[0] = f64::NEG_INFINITY;
        m.params.decoder.bias[0] = 5.0;
        let x = [0.4];
        let mean = m.expected_event_time(&x, 37, &mut rng_from_seed(1)).unwrap();
        let direct = m.decode(&m.encode(&x).unwrap().mu).max(0.0);
        assert_eq!(mean, direct);
    }

    #[test]
    fn sampling_is_seeded() {
        let m = SurvedModel::new(tiny_config()).unwrap();
        let a = m.sample_event_times(&[0.1], 20, &mut rng_from_seed(9)).unwrap();
        let b = m.sample_event_times(&[0.1], 20, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_mean_of_linear_decoder() {
        let mut m = SurvedModel::zeroed(tiny_config()).unwrap();
        m.params.mu_head.bias[0] = 2.0;
        m.params.decoder.weights[0] = 1.0;
        let n = 100_000;
        let mean = m.expected_event_time(&[0.0], n, &mut rng_from_seed(3)).unwrap();
        // clamping at zero shifts the mean by E[max(0,-Z-2)] ≈ 8.5e-3 for Z~N(0,1)
        let clamp_bias = 0.008_49;
        assert!((mean - 2.0 - clamp_bias).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn bias_shift_translates_curves() {
        let mut m = SurvedModel::new(tiny_config()).unwrap();
        m.params.decoder.bias[0] = 10.0;
        let a = m.survival_function(&[0.3], 30, &mut rng_from_seed(4)).unwrap();
        m.params.decoder.bias[0] = 12.5;
        let b = m.survival_function(&[0.3], 30, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a.probs, b.probs);
        for (ta, tb) in a.times.iter().zip(&b.times) {
            assert!((tb - ta - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut m = SurvedModel::new(ModelConfig {
            input_dim: 2,
            learning_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        let before = m.params.clone();
        let batch = vec![
            SurvivalRecord::new(0.5, true, vec![0.1, 0.2]),
            SurvivalRecord::new(0.8, false, vec![-0.3, 0.4]),
        ];
        let loss = m.train_step(&batch, &mut rng_from_seed(1)).unwrap();
        assert!(loss.total.is_finite());
        assert_eq!(m.params, before);
    }

    #[test]
    fn config_validation() {
        assert!(SurvedModel::new(ModelConfig {
            first_layer_dropout: 0.5,
            ..Default::default()
        })
        .is_err());
        assert!(SurvedModel::new(ModelConfig {
            latent_dim: 0,
            ..Default::default()
        })
        .is_err());
        assert!(SurvedModel::new(ModelConfig {
            momentum: 1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = SurvedModel::new(tiny_config()).unwrap();
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        let back = SurvedModel::from_checkpoint(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.params, m.params);
        let mut bad = m.to_checkpoint();
        bad.params.decoder.bias.push(1.0);
        assert!(SurvedModel::from_checkpoint(bad).is_err());
    }
}
