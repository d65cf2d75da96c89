//! Generators checked against direct evaluation of their defining formulas.

mod common;

use common::{all_indices, max_abs_diff};
use lvtensor::generators::{generate_signal, noise_sigma_for_level, DistanceFunction, LatentModel};
use lvtensor::rng::rng_from_seed;
use lvtensor::Matrix;
use rand::Rng;

fn mean_pairwise_sq(x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    (sq(x, y) + sq(y, z) + sq(z, x)) / 3.0
}

#[test]
fn distance_models_match_direct_evaluation() {
    let mut rng = rng_from_seed(3);
    let (d, s) = (6, 3);
    let latents = Matrix::from_fn(d, s, |_, _| rng.random_range(0.0..1.0));
    let table: [(DistanceFunction, fn(f64) -> f64); 3] = [
        (DistanceFunction::Model1, |t| (-t).exp()),
        (DistanceFunction::Model2, |t| t.cos()),
        (DistanceFunction::Model3, |t| (1.0 + t).ln()),
    ];
    for (f, reference) in table {
        let theta = generate_signal(&LatentModel::distance(f, latents.clone()).unwrap(), &[d, d, d]).unwrap();
        let expected: Vec<f64> = all_indices(&[d, d, d])
            .iter()
            .map(|i| reference(mean_pairwise_sq(latents.row(i[0]), latents.row(i[1]), latents.row(i[2]))))
            .collect();
        assert!(max_abs_diff(theta.values(), &expected) < 1e-12, "{f:?}");
    }
}

#[test]
fn cp_model_matches_outer_product_sum() {
    let m = LatentModel::random_cp(&[4, 3, 5], 2, 8).unwrap();
    let theta = generate_signal(&m, &[4, 3, 5]).unwrap();
    let lvtensor::generators::LatentFunction::Cp { weights } = m.function() else {
        panic!("cp model")
    };
    let f = m.latents();
    for idx in all_indices(&[4, 3, 5]) {
        let v: f64 = (0..2)
            .map(|r| weights[r] * f[0].get(idx[0], r) * f[1].get(idx[1], r) * f[2].get(idx[2], r))
            .sum();
        assert!((theta.get(&idx) - v).abs() < 1e-12);
    }
}

#[test]
fn noise_level_matches_root_mean_square() {
    let theta = generate_signal(&LatentModel::random_cp(&[5, 5, 5], 1, 1).unwrap(), &[5, 5, 5]).unwrap();
    let rms = (theta.values().iter().map(|v| v * v).sum::<f64>() / 125.0).sqrt();
    assert!((noise_sigma_for_level(&theta, 0.5).unwrap() - 0.5 * rms).abs() < 1e-15);
}
