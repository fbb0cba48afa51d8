//! Analytic gradients against central finite differences.

mod common;

use common::gradcheck::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use survdecomp::losses::{LossBatch, LossWeights};

#[test]
fn loss_terms_match_finite_differences() {
    let worst = loss_term_max_rel_err(11, 50);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn network_matches_finite_differences() {
    for seed in 0..5 {
        let worst = end_to_end_max_rel_err(seed);
        assert!(worst < 1e-3, "seed {seed}: max relative error {worst}");
    }
}

#[test]
fn individual_terms_isolated() {
    // each term alone, so a wrong sign in one cannot hide behind another
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for which in 0..4 {
        let mut b = random_batch(&mut rng);
        let mut w = LossWeights {
            lambda_e: 0.0,
            lambda_c: 0.0,
            lambda_kl: 0.0,
            lambda_lb: 0.0,
        };
        match which {
            0 => w.lambda_e = 1.0,
            1 => w.lambda_c = 1.0,
            2 => w.lambda_kl = 1.0,
            _ => w.lambda_lb = 1.0,
        }
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
            let err = rel_err(g.d_pred[k], (up - down) / (2.0 * STEP));
            assert!(err < 1e-4, "term {which} row {k}: {err}");
        }
    }
}
