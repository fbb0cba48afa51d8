//! Synthetic survival data with known latent event times.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{ColumnSchema, SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, round_half_up, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: SurvivalDataset,
    /// True event time of every row, observed or not.
    pub latent_times: Vec<f64>,
}

/// Censors a random `censor_frac` share of subjects at a time drawn
/// uniformly below their event time.
fn censor(latent: &[f64], censor_frac: f64, rng: &mut Rng) -> Vec<(f64, bool)> {
    let n = latent.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut out: Vec<(f64, bool)> = latent.iter().map(|&t| (t, true)).collect();
    for &k in &idx[..round_half_up(censor_frac * n as f64).min(n)] {
        out[k] = (rng.gen_range(0.0..1.0) * latent[k], false);
    }
    out
}

fn check_frac(censor_frac: f64) -> Result<()> {
    if (0.0..1.0).contains(&censor_frac) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "censoring fraction must be in [0,1), got {censor_frac}"
        )))
    }
}

/// Two uniform covariates on [-2, 2] and
/// `t = |exp(sin x1 + x2²) + N(0, 0.1²)|`.
pub fn nonlinear(n: usize, censor_frac: f64, seed: u64) -> Result<SyntheticData> {
    check_frac(censor_frac)?;
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut xs = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.gen_range(-2.0..=2.0);
        let x2: f64 = rng.gen_range(-2.0..=2.0);
        let t = ((x1.sin() + x2 * x2).exp() + noise.sample(&mut rng)).abs();
        xs.push(vec![x1, x2]);
        latent.push(t);
    }
    let observed = censor(&latent, censor_frac, &mut rng);
    let records = xs
        .into_iter()
        .zip(observed)
        .map(|(x, (t, e))| SurvivalRecord::new(t, e, x))
        .collect();
    Ok(SyntheticData {
        dataset: SurvivalDataset::new(
            vec![ColumnSchema::numeric("x1"), ColumnSchema::numeric("x2")],
            records,
        )?,
        latent_times: latent,
    })
}

/// Exactly `n_events` observed events and `n_censored` censored rows, in
/// random order. Three covariates with a log-linear effect on time.
pub fn with_counts(n_events: usize, n_censored: usize, seed: u64) -> Result<SyntheticData> {
    let mut rng = rng_from_seed(seed);
    let n = n_events + n_censored;
    let beta = [0.8, -0.5, 0.3];
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let lin: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let e: f64 = rng.sample(StandardNormal);
        let t = (1.0 + lin + 0.5 * e).exp();
        let event = k < n_events;
        let observed = if event { t } else { rng.gen_range(0.0..1.0) * t };
        rows.push((SurvivalRecord::new(observed, event, x), t));
    }
    rows.shuffle(&mut rng);
    let (records, latent_times) = rows.into_iter().unzip();
    Ok(SyntheticData {
        dataset: SurvivalDataset::new(
            (1..=3).map(|i| ColumnSchema::numeric(format!("x{i}"))).collect(),
            records,
        )?,
        latent_times,
    })
}

/// 6201 events and 2904 censored rows, the shape of the SUPPORT cohort.
pub fn support_shaped(seed: u64) -> Result<SyntheticData> {
    with_counts(6201, 2904, seed)
}
