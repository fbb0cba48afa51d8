use survdecomp::dataset::{ColumnSchema, SurvivalDataset, SurvivalRecord};
use survdecomp::rng::rng_from_seed;
use survdecomp::surved::{fit, FitOptions, ModelConfig, SurvedModel};

/// 100 rows, one covariate; events at `t = 1 + x`, every fourth row censored.
fn separable() -> SurvivalDataset {
    let records = (0..100)
        .map(|i| {
            let x = i as f64 / 100.0;
            let t = 1.0 + x;
            if i % 4 == 0 {
                SurvivalRecord::new(0.5 * t, false, vec![x])
            } else {
                SurvivalRecord::new(t, true, vec![x])
            }
        })
        .collect();
    SurvivalDataset::new(vec![ColumnSchema::numeric("x")], records).unwrap()
}

fn small_config() -> ModelConfig {
    ModelConfig {
        input_dim: 1,
        hidden_widths: vec![8, 8],
        latent_dim: 2,
        n_samples: 20,
        batch_size: 20,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn loss_goes_down_on_separable_data() {
    let data = separable();
    let mut model = SurvedModel::new(small_config()).unwrap();
    let mut rng = rng_from_seed(1);
    let mut losses = Vec::new();
    for step in 0..200 {
        let start = (step * 20) % 100;
        let batch = &data.records[start..start + 20];
        losses.push(model.train_step(batch, &mut rng).unwrap().total);
    }
    let head: f64 = losses[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = losses[180..].iter().sum::<f64>() / 20.0;
    assert!(tail < head, "smoothed loss {head} -> {tail}");
}

#[test]
fn frozen_model_stops_after_patience() {
    let data = separable();
    let cfg = ModelConfig {
        learning_rate: 0.0,
        patience: 1,
        max_epochs: 50,
        ..small_config()
    };
    let r = fit(
        SurvedModel::new(cfg).unwrap(),
        &data,
        &data,
        &FitOptions::default(),
    )
    .unwrap();
    assert_eq!(r.history.len(), 2);
    assert_eq!(r.best_epoch, Some(1));
    assert!(r.history[0].improved && !r.history[1].improved);
    assert_eq!(r.history[0].validation_ci, r.history[1].validation_ci);
}

#[test]
fn zero_epochs_returns_initial_model() {
    let data = separable();
    let cfg = ModelConfig {
        max_epochs: 0,
        ..small_config()
    };
    let init = SurvedModel::new(cfg.clone()).unwrap();
    let r = fit(init.clone(), &data, &data, &FitOptions::default()).unwrap();
    assert!(r.history.is_empty());
    assert_eq!(r.best_epoch, None);
    assert_eq!(r.model.params, init.params);
}

#[test]
fn same_seed_same_history() {
    let data = separable();
    let cfg = ModelConfig {
        max_epochs: 5,
        ..small_config()
    };
    let a = fit(
        SurvedModel::new(cfg.clone()).unwrap(),
        &data,
        &data,
        &FitOptions::default(),
    )
    .unwrap();
    let b = fit(
        SurvedModel::new(cfg).unwrap(),
        &data,
        &data,
        &FitOptions::default(),
    )
    .unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
}

#[test]
fn vanishing_variance_gives_decoded_mean() {
    let mut m = SurvedModel::new(small_config()).unwrap();
    m.params.log_var_head.weights.fill(0.0);
    m.params.log_var_head.bias.fill(-80.0);
    m.params.decoder.bias[0] = 10.0;
    let x = [0.3];
    let mu = m.encode(&x).unwrap().mu;
    let expected = m.expected_event_time(&x, 50, &mut rng_from_seed(2)).unwrap();
    assert!((expected - m.decode(&mu)).abs() < 1e-12);
}

#[test]
fn decoder_bias_shifts_predictions() {
    let data = separable();
    let mut m = SurvedModel::new(small_config()).unwrap();
    m.params.decoder.bias[0] = 20.0;
    let before = m.predict(&data, 8).unwrap();
    m.params.decoder.bias[0] += 3.5;
    let after = m.predict(&data, 8).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!((b - a - 3.5).abs() < 1e-9);
    }
}
