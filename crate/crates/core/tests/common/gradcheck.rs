//! Finite-difference oracles for the objective and the network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survdecomp::losses::{comparable_pairs, GaussianLatent, LossBatch, LossWeights};
use survdecomp::surved::{ModelConfig, SurvedModel};
use survdecomp::{Comparability, SurvivalRecord};

pub const STEP: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub struct RandomBatch {
    pub pred: Vec<f64>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub latents: Vec<GaussianLatent>,
    pub pairs: Vec<(usize, usize)>,
}

/// Targets sit at least 0.1 away from predictions so no kink is crossed.
pub fn random_batch(rng: &mut ChaCha8Rng) -> RandomBatch {
    let n = rng.gen_range(2..=32);
    let dim = rng.gen_range(1..=4);
    let mut pred = Vec::new();
    let mut times = Vec::new();
    let mut events = Vec::new();
    for _ in 0..n {
        let p: f64 = rng.gen_range(-1.0..2.0);
        let gap: f64 = rng.gen_range(0.1..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        pred.push(p);
        times.push((p + gap).abs());
        events.push(rng.gen_bool(0.6));
    }
    // keep targets clear of the kinks after the abs()
    for k in 0..n {
        if (times[k] - pred[k]).abs() < 0.1 {
            times[k] = pred[k].abs() + 0.5;
        }
    }
    let latents = (0..n)
        .map(|_| GaussianLatent {
            mu: (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            log_var: (0..dim).map(|_| rng.gen_range(-2.0..1.5)).collect(),
        })
        .collect();
    let pairs = comparable_pairs(&times, &events, Comparability::default());
    RandomBatch {
        pred,
        times,
        events,
        latents,
        pairs,
    }
}

pub fn weights(rng: &mut ChaCha8Rng) -> LossWeights {
    LossWeights {
        lambda_e: rng.gen_range(0.1..2.0),
        lambda_c: rng.gen_range(0.1..2.0),
        lambda_kl: rng.gen_range(0.1..2.0),
        lambda_lb: rng.gen_range(0.1..2.0),
    }
}

pub fn batch_loss(b: &RandomBatch, w: &LossWeights) -> f64 {
    LossBatch {
        pred: &b.pred,
        times: &b.times,
        events: &b.events,
        latents: &b.latents,
        pairs: &b.pairs,
    }
    .loss(w)
    .unwrap()
    .total
}

/// Largest relative error over every prediction and latent entry.
pub fn loss_term_max_rel_err(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let mut b = random_batch(&mut rng);
        let w = weights(&mut rng);
        let g = LossBatch {
            pred: &b.pred,
            times: &b.times,
            events: &b.events,
            latents: &b.latents,
            pairs: &b.pairs,
        }
        .gradients(&w)
        .unwrap();

        for k in 0..b.pred.len() {
            let orig = b.pred[k];
            b.pred[k] = orig + STEP;
            let up = batch_loss(&b, &w);
            b.pred[k] = orig - STEP;
            let down = batch_loss(&b, &w);
            b.pred[k] = orig;
            worst = worst.max(rel_err(g.d_pred[k], (up - down) / (2.0 * STEP)));

            for d in 0..b.latents[k].dim() {
                let orig = b.latents[k].mu[d];
                b.latents[k].mu[d] = orig + STEP;
                let up = batch_loss(&b, &w);
                b.latents[k].mu[d] = orig - STEP;
                let down = batch_loss(&b, &w);
                b.latents[k].mu[d] = orig;
                worst = worst.max(rel_err(g.d_mu[k][d], (up - down) / (2.0 * STEP)));

                let orig = b.latents[k].log_var[d];
                b.latents[k].log_var[d] = orig + STEP;
                let up = batch_loss(&b, &w);
                b.latents[k].log_var[d] = orig - STEP;
                let down = batch_loss(&b, &w);
                b.latents[k].log_var[d] = orig;
                worst = worst.max(rel_err(g.d_log_var[k][d], (up - down) / (2.0 * STEP)));
            }
        }
    }
    worst
}

/// 6 rows, 3 features, latent 2; every weight perturbed with fixed noise.
pub fn end_to_end_max_rel_err(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        input_dim: 3,
        hidden_widths: vec![5, 4],
        latent_dim: 2,
        weights: weights(&mut rng),
        seed,
        ..Default::default()
    };
    let mut model = SurvedModel::new(config).unwrap();
    // predictions land near 3; targets stay clear of both kinks
    model.params.decoder.bias[0] = 3.0;
    let targets = [
        (4.0, true),
        (5.0, true),
        (6.0, true),
        (5.5, false),
        (0.5, false),
        (7.0, false),
    ];
    let batch: Vec<SurvivalRecord> = targets
        .iter()
        .map(|&(t, e)| SurvivalRecord::new(t, e, (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect()))
        .collect();
    let eps: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();

    let (_, grad) = model.loss_and_gradients(&batch, &eps).unwrap();
    let analytic: Vec<f64> = grad.slices().concat();
    let n_params = analytic.len();
    let mut worst: f64 = 0.0;
    for idx in 0..n_params {
        let perturbed = |delta: f64| {
            let mut m = model.clone();
            let mut seen = 0;
            for s in m.params.slices_mut() {
                if idx < seen + s.len() {
                    s[idx - seen] += delta;
                    break;
                }
                seen += s.len();
            }
            m.batch_loss(&batch, &eps).unwrap().total
        };
        let numeric = (perturbed(STEP) - perturbed(-STEP)) / (2.0 * STEP);
        worst = worst.max(rel_err(analytic[idx], numeric));
    }
    worst
}
