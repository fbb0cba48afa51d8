mod common;

use common::instances::{definition_counts, random_instance};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use survdecomp::concordance::{
    count_pairs_exact, count_pairs_fast, decompose, verify_identity, Comparability,
};
use survdecomp::SurvivalDataset;

fn instance() -> impl Strategy<Value = (SurvivalDataset, Vec<f64>)> {
    (2usize..=300).prop_flat_map(|n| {
        let times = prop_oneof![vec((0u8..25).prop_map(f64::from), n), vec(0.0f64..1000.0, n),];
        let preds = prop_oneof![
            vec((-8i32..8).prop_map(f64::from), n),
            vec(-1.0f64..1.0, n),
            vec((0u8..3).prop_map(f64::from), n),
        ];
        (times, vec(any::<bool>(), n), preds)
            .prop_map(|(t, e, p)| (SurvivalDataset::from_times(&t, &e).unwrap(), p))
    })
}

fn both_conventions() -> [Comparability; 2] {
    [
        Comparability::default(),
        Comparability {
            tied_event_censored: false,
        },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fast_equals_exact_equals_definition((data, pred) in instance()) {
        for conv in both_conventions() {
            let def = definition_counts(&data, &pred, conv.tied_event_censored);
            match (count_pairs_exact(&data, &pred, conv), count_pairs_fast(&data, &pred, conv)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a, def);
                    prop_assert_eq!(b, def);
                }
                (Err(_), Err(_)) => prop_assert_eq!(def.n_ee + def.n_ec, 0),
                other => prop_assert!(false, "paths disagree: {:?}", other),
            }
        }
    }

    #[test]
    fn increasing_transform_keeps_counts((data, pred) in instance()) {
        let conv = Comparability::default();
        let moved: Vec<f64> = pred.iter().map(|p| p * p * p + 7.0 * p + 100.0).collect();
        if let Ok(a) = count_pairs_fast(&data, &pred, conv) {
            prop_assert_eq!(a, count_pairs_fast(&data, &moved, conv).unwrap());
        }
    }

    #[test]
    fn negation_swaps_concordance((data, pred) in instance()) {
        let conv = Comparability::default();
        let neg: Vec<f64> = pred.iter().map(|p| -p).collect();
        if let Ok(a) = count_pairs_fast(&data, &pred, conv) {
            let b = count_pairs_fast(&data, &neg, conv).unwrap();
            prop_assert_eq!((a.n_plus_ee, a.n_minus_ee, a.n_tie_ee), (b.n_minus_ee, b.n_plus_ee, b.n_tie_ee));
            prop_assert_eq!((a.n_plus_ec, a.n_minus_ec, a.n_tie_ec), (b.n_minus_ec, b.n_plus_ec, b.n_tie_ec));
            if a.n_tie_ee + a.n_tie_ec == 0 {
                let (da, db) = (decompose(&a).unwrap(), decompose(&b).unwrap());
                prop_assert!((da.ci + db.ci - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_star_ignores_predictions((data, pred) in instance(), seed in any::<u64>()) {
        let conv = Comparability::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other: Vec<f64> = pred.iter().map(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0)).collect();
        if let Ok(a) = count_pairs_fast(&data, &pred, conv) {
            let b = count_pairs_fast(&data, &other, conv).unwrap();
            prop_assert_eq!(decompose(&a).unwrap().alpha_star, decompose(&b).unwrap().alpha_star);
        }
    }

    #[test]
    fn decomposition_bounds_and_identity((data, pred) in instance()) {
        if let Ok(c) = count_pairs_fast(&data, &pred, Comparability::default()) {
            prop_assert_eq!(c.n_plus_ee + c.n_minus_ee + c.n_tie_ee, c.n_ee);
            prop_assert_eq!(c.n_plus_ec + c.n_minus_ec + c.n_tie_ec, c.n_ec);
            let d = decompose(&c).unwrap();
            for v in [Some(d.ci), d.ci_ee, d.ci_ec, Some(d.alpha), Some(d.alpha_star)].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&d.alpha_deviation));
            prop_assert!((d.alpha_deviation - (d.alpha - d.alpha_star)).abs() < 1e-15);
            if let Ok(residual) = verify_identity(&d) {
                prop_assert!(residual < 1e-12, "residual {}", residual);
            }
        }
    }
}

#[test]
fn tie_heavy_three_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 2000;
    let times: Vec<f64> = (0..n)
        .map(|_| rand::Rng::gen_range(&mut rng, 0..50) as f64)
        .collect();
    let events: Vec<bool> = (0..n).map(|_| rand::Rng::gen_bool(&mut rng, 0.6)).collect();
    let pred: Vec<f64> = (0..n)
        .map(|_| rand::Rng::gen_range(&mut rng, 0..3) as f64)
        .collect();
    let data = SurvivalDataset::from_times(&times, &events).unwrap();
    let conv = Comparability::default();
    assert_eq!(
        count_pairs_fast(&data, &pred, conv).unwrap(),
        count_pairs_exact(&data, &pred, conv).unwrap()
    );
}

#[test]
fn random_instances_with_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..300 {
        let (data, pred) = random_instance(&mut rng, 120);
        for conv in both_conventions() {
            let def = definition_counts(&data, &pred, conv.tied_event_censored);
            if def.n_ee + def.n_ec == 0 {
                continue;
            }
            assert_eq!(count_pairs_fast(&data, &pred, conv).unwrap(), def);
        }
    }
}

/// Wall-clock comparison on 10 000 random records; informative only.
#[test]
fn fast_path_speedup_report() {
    use std::time::Instant;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let times: Vec<f64> = (0..n)
        .map(|_| rand::Rng::gen_range(&mut rng, 0.0..100.0))
        .collect();
    let events: Vec<bool> = (0..n).map(|_| rand::Rng::gen_bool(&mut rng, 0.5)).collect();
    let pred: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect();
    let data = SurvivalDataset::from_times(&times, &events).unwrap();
    let conv = Comparability::default();
    let t0 = Instant::now();
    let exact = count_pairs_exact(&data, &pred, conv).unwrap();
    let t_exact = t0.elapsed();
    let t0 = Instant::now();
    let fast = count_pairs_fast(&data, &pred, conv).unwrap();
    let t_fast = t0.elapsed();
    assert_eq!(exact, fast);
    println!(
        "n={n}: exact {:?}, fast {:?}, speedup {:.0}x",
        t_exact,
        t_fast,
        t_exact.as_secs_f64() / t_fast.as_secs_f64()
    );
}
