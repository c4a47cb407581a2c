mod common;

use brixkit::selection::TABLE_LAMBDAS;
use brixkit::{ridge_fit, ridge_predict};
use rand::Rng;

#[test]
fn closed_form_matches_descent_on_random_instances() {
    let mut rng = common::seeded(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (x, y) = common::random_instance(&mut rng);
        let lambda = TABLE_LAMBDAS[rng.random_range(0..TABLE_LAMBDAS.len())];
        let model = ridge_fit(&x, &y, lambda).unwrap();
        let (w, b) = common::descent_ridge(&x, &y, lambda);
        for (a, o) in model.weights.iter().zip(&w) {
            worst = worst.max((a - o).abs());
        }
        worst = worst.max((model.intercept - b).abs());
    }
    assert!(worst < 1e-6, "max abs difference {worst}");
}

#[test]
fn predictions_match_descent_model() {
    let mut rng = common::seeded(7);
    for _ in 0..10 {
        let (x, y) = common::random_instance(&mut rng);
        let model = ridge_fit(&x, &y, 3.0).unwrap();
        let (w, b) = common::descent_ridge(&x, &y, 3.0);
        let pred = ridge_predict(&model, &x).unwrap();
        for (row, p) in x.iter().zip(&pred) {
            let direct: f64 = b + row
                .iter()
                .zip(model.means.iter().zip(&model.scales))
                .zip(&w)
                .map(|((v, (m, s)), wj)| (v - m) / s * wj)
                .sum::<f64>();
            assert!((direct - p).abs() < 1e-6);
        }
    }
}
