//! Training objective of the encoder-decoder model and its analytic
//! gradients.
//!
//! `L = λe·Le + λc·Lc + λkl·Lkl − λlb·Clb` where `Le` is the mean absolute
//! error over event rows, `Lc` the mean hinge `max(0, t − pred)` over
//! censored rows, `Lkl` the mean KL divergence of the diagonal Gaussian
//! posterior from N(0, I), and `Clb` the mean of `1 + log2 σ(pred_late −
//! pred_early)` over comparable pairs, a lower bound on the C-index.

use serde::{Deserialize, Serialize};

use crate::concordance::{orient_pair, Comparability, PairClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_e: f64,
    pub lambda_c: f64,
    pub lambda_kl: f64,
    pub lambda_lb: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_e: 1.0,
            lambda_c: 1.0,
            lambda_kl: 0.01,
            lambda_lb: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_e, self.lambda_c, self.lambda_kl, self.lambda_lb];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "loss weights must be finite and >= 0: {self:?}"
            )))
        }
    }
}

/// Diagonal Gaussian posterior for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLatent {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl GaussianLatent {
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// A masked mean and how many rows contributed. `count == 0` means the
/// batch had no rows of that kind and `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub value: f64,
    pub count: usize,
}

impl Term {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub l_e: f64,
    pub l_c: f64,
    pub l_kl: f64,
    pub c_lb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_e: f64,
    pub l_c: f64,
    pub l_kl: f64,
    pub c_lb: f64,
    pub total: f64,
}

fn check_lengths(pred: &[f64], true_t: &[f64], is_event: &[bool]) -> Result<()> {
    for len in [true_t.len(), is_event.len()] {
        if len != pred.len() {
            return Err(Error::LengthMismatch {
                expected: pred.len(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// Mean absolute error over event rows.
pub fn l_event(pred: &[f64], true_t: &[f64], is_event: &[bool]) -> Result<Term> {
    check_lengths(pred, true_t, is_event)?;
    let (sum, count) = (0..pred.len())
        .filter(|&k| is_event[k])
        .fold((0.0, 0), |(s, c), k| (s + (true_t[k] - pred[k]).abs(), c + 1));
    Ok(Term {
        value: if count > 0 { sum / count as f64 } else { 0.0 },
        count,
    })
}

/// Mean of `max(0, t − pred)` over censored rows.
pub fn l_censored(pred: &[f64], true_t: &[f64], is_event: &[bool]) -> Result<Term> {
    check_lengths(pred, true_t, is_event)?;
    let (sum, count) = (0..pred.len())
        .filter(|&k| !is_event[k])
        .fold((0.0, 0), |(s, c), k| (s + (true_t[k] - pred[k]).max(0.0), c + 1));
    Ok(Term {
        value: if count > 0 { sum / count as f64 } else { 0.0 },
        count,
    })
}

/// Mean over subjects of KL(N(μ, diag e^{log_var}) ‖ N(0, I)).
pub fn kl_std_normal(latents: &[GaussianLatent]) -> Result<f64> {
    if latents.is_empty() {
        return Err(Error::InvalidArgument("KL over an empty batch".into()));
    }
    let mut sum = 0.0;
    for (s, lat) in latents.iter().enumerate() {
        if lat.mu.len() != lat.log_var.len() {
            return Err(Error::LengthMismatch {
                expected: lat.mu.len(),
                actual: lat.log_var.len(),
            });
        }
        for (&m, &lv) in lat.mu.iter().zip(&lat.log_var) {
            if !(m.is_finite() && lv.is_finite()) {
                return Err(Error::NonFinite(format!("latent of subject {s}")));
            }
            sum += 0.5 * (m * m + lv.exp() - 1.0 - lv);
        }
    }
    Ok(sum / latents.len() as f64)
}

/// `ln σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Differentiable C-index lower bound. Each pair is `(late, early)`.
pub fn c_lb(pred: &[f64], pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "lower bound needs at least one pair".into(),
        ));
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(late, early)| 1.0 + log_sigmoid(pred[late] - pred[early]) / std::f64::consts::LN_2)
        .sum();
    Ok(sum / pairs.len() as f64)
}

/// All comparable pairs among `times`/`events`, oriented `(late, early)`.
pub fn comparable_pairs(times: &[f64], events: &[bool], conv: Comparability) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let (class, i_first) = orient_pair(times[i], events[i], times[j], events[j], conv);
            if class != PairClass::NotComparable {
                pairs.push(if i_first { (j, i) } else { (i, j) });
            }
        }
    }
    pairs
}

pub fn total_loss(weights: &LossWeights, parts: &LossParts) -> LossBreakdown {
    LossBreakdown {
        l_e: parts.l_e,
        l_c: parts.l_c,
        l_kl: parts.l_kl,
        c_lb: parts.c_lb,
        total: weights.lambda_e * parts.l_e + weights.lambda_c * parts.l_c + weights.lambda_kl * parts.l_kl
            - weights.lambda_lb * parts.c_lb,
    }
}

/// Everything the objective needs for one mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct LossBatch<'a> {
    pub pred: &'a [f64],
    pub times: &'a [f64],
    pub events: &'a [bool],
    pub latents: &'a [GaussianLatent],
    /// `(late, early)` comparable pairs within the batch.
    pub pairs: &'a [(usize, usize)],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub breakdown: LossBreakdown,
    /// ∂L/∂pred per row.
    pub d_pred: Vec<f64>,
    /// ∂L/∂μ per row and latent dimension.
    pub d_mu: Vec<Vec<f64>>,
    /// ∂L/∂log_var per row and latent dimension.
    pub d_log_var: Vec<Vec<f64>>,
    pub n_events: usize,
    pub n_censored: usize,
}

impl<'a> LossBatch<'a> {
    fn validate(&self) -> Result<()> {
        check_lengths(self.pred, self.times, self.events)?;
        if self.latents.len() != self.pred.len() {
            return Err(Error::LengthMismatch {
                expected: self.pred.len(),
                actual: self.latents.len(),
            });
        }
        if let Some(&(a, b)) = self
            .pairs
            .iter()
            .find(|&&(a, b)| a >= self.pred.len() || b >= self.pred.len())
        {
            return Err(Error::InvalidArgument(format!("pair ({a}, {b}) out of range")));
        }
        Ok(())
    }

    /// Forward pass. Empty event, censored or pair sets contribute 0.
    pub fn loss(&self, weights: &LossWeights) -> Result<LossBreakdown> {
        self.validate()?;
        let parts = LossParts {
            l_e: l_event(self.pred, self.times, self.events)?.value,
            l_c: l_censored(self.pred, self.times, self.events)?.value,
            l_kl: kl_std_normal(self.latents)?,
            c_lb: if self.pairs.is_empty() {
                0.0
            } else {
                c_lb(self.pred, self.pairs)?
            },
        };
        Ok(total_loss(weights, &parts))
    }

    /// Loss and its gradient. At `pred == t` the absolute value and the
    /// hinge both take subgradient 0.
    pub fn gradients(&self, weights: &LossWeights) -> Result<LossGradients> {
        let breakdown = self.loss(weights)?;
        let n = self.pred.len();
        let n_events = self.events.iter().filter(|&&e| e).count();
        let n_censored = n - n_events;
        let mut d_pred = vec![0.0; n];

        for (k, d) in d_pred.iter_mut().enumerate() {
            let diff = self.pred[k] - self.times[k];
            if self.events[k] {
                if diff != 0.0 {
                    *d += weights.lambda_e * diff.signum() / n_events as f64;
                }
            } else if diff < 0.0 {
                *d -= weights.lambda_c / n_censored as f64;
            }
        }

        if !self.pairs.is_empty() {
            let scale = weights.lambda_lb / (self.pairs.len() as f64 * std::f64::consts::LN_2);
            for &(late, early) in self.pairs {
                // d/dx log2 σ(x) = σ(−x) / ln 2
                let g = scale * sigmoid(self.pred[early] - self.pred[late]);
                d_pred[late] -= g;
                d_pred[early] += g;
            }
        }

        let kl_scale = weights.lambda_kl / n as f64;
        let d_mu = self
            .latents
            .iter()
            .map(|l| l.mu.iter().map(|m| kl_scale * m).collect())
            .collect();
        let d_log_var = self
            .latents
            .iter()
            .map(|l| {
                l.log_var
                    .iter()
                    .map(|lv| kl_scale * 0.5 * (lv.exp() - 1.0))
                    .collect()
            })
            .collect();

        Ok(LossGradients {
            breakdown,
            d_pred,
            d_mu,
            d_log_var,
            n_events,
            n_censored,
        })
    }
}
