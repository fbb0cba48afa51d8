//! Random concordance instances and a from-definition pair counter.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use survdecomp::{PairCounts, SurvivalDataset};

/// Random dataset and predictions. Times and predictions are drawn from
/// small integer grids part of the time so equal-time and equal-prediction
/// ties are common.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> (SurvivalDataset, Vec<f64>) {
    let n = rng.gen_range(2..=max_n);
    let censoring = rng.gen_range(0.1..0.9);
    let time_grid = if rng.gen_bool(0.5) {
        Some(rng.gen_range(2..20))
    } else {
        None
    };
    let times: Vec<f64> = (0..n)
        .map(|_| match time_grid {
            Some(g) => rng.gen_range(0..g) as f64,
            None => rng.gen_range(0.0..100.0),
        })
        .collect();
    let events: Vec<bool> = (0..n).map(|_| !rng.gen_bool(censoring)).collect();
    let mut pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    // tie clusters: copy a few prediction values onto other subjects
    let clusters = rng.gen_range(0..=n / 3);
    for _ in 0..clusters {
        let v = pred[rng.gen_range(0..n)];
        let size = rng.gen_range(2..=5.min(n));
        for _ in 0..size {
            let k = rng.gen_range(0..n);
            pred[k] = v;
        }
    }
    if rng.gen_bool(0.1) {
        let levels = [0.0, 1.0, 2.0];
        for p in pred.iter_mut() {
            *p = *levels.choose(rng).unwrap();
        }
    }
    (SurvivalDataset::from_times(&times, &events).unwrap(), pred)
}

/// Counts over ordered pairs `(i, j)` straight from the definition:
/// `i` is an event, `t_i < t_j` (or `t_i == t_j`, `j` censored, when
/// `tied_event_censored`).
pub fn definition_counts(data: &SurvivalDataset, pred: &[f64], tied_event_censored: bool) -> PairCounts {
    let r = &data.records;
    let mut c = PairCounts::default();
    for i in 0..r.len() {
        if !r[i].event {
            continue;
        }
        for j in 0..r.len() {
            if i == j {
                continue;
            }
            let later = r[i].time < r[j].time;
            let tie_ok = tied_event_censored && r[i].time == r[j].time && !r[j].event;
            if !(later || tie_ok) {
                continue;
            }
            let (plus, minus, tie, total) = if r[j].event {
                (&mut c.n_plus_ee, &mut c.n_minus_ee, &mut c.n_tie_ee, &mut c.n_ee)
            } else {
                (&mut c.n_plus_ec, &mut c.n_minus_ec, &mut c.n_tie_ec, &mut c.n_ec)
            };
            *total += 1;
            if pred[i] < pred[j] {
                *plus += 1;
            } else if pred[i] > pred[j] {
                *minus += 1;
            } else {
                *tie += 1;
            }
        }
    }
    c
}
