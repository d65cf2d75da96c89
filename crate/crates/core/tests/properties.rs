mod common;

use common::max_abs_diff;
use lvtensor::clustering::{kmeans, wcss};
use lvtensor::estimators::{dse, hooi, hosvd, HooiParams, RankRule};
use lvtensor::generators::{add_noise, generate_signal, LatentModel, NoiseSpec};
use lvtensor::rng::rng_from_seed;
use lvtensor::{DenseTensor, Matrix};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn noisy_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = rng_from_seed(seed);
    DenseTensor::from_fn(dims, |_| rng.sample::<f64, _>(StandardNormal)).unwrap()
}

fn dims_and_ranks() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec(2usize..7, 3).prop_flat_map(|dims| {
        let ranks = dims.iter().map(|&d| 1..=d).collect::<Vec<_>>();
        (Just(dims), ranks)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dse_and_hosvd_are_idempotent((dims, ranks) in dims_and_ranks(), seed in 0u64..1000) {
        let y = noisy_tensor(&dims, seed);
        for f in [dse, hosvd] {
            let once = f(&y, &ranks).unwrap().estimate;
            let twice = f(&once, &ranks).unwrap().estimate;
            let scale = once.frobenius_norm().max(1.0);
            prop_assert!(max_abs_diff(once.values(), twice.values()) < 1e-8 * scale);
            // projections never increase the norm
            prop_assert!(once.frobenius_norm() <= y.frobenius_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn full_rank_estimators_return_input((dims, _) in dims_and_ranks(), seed in 0u64..1000) {
        let y = noisy_tensor(&dims, seed);
        let est = dse(&y, &dims).unwrap().estimate;
        prop_assert!(max_abs_diff(est.values(), y.values()) < 1e-10);
    }

    #[test]
    fn hooi_fit_is_monotone((dims, ranks) in dims_and_ranks(), seed in 0u64..1000) {
        let y = noisy_tensor(&dims, seed);
        let out = hooi(&y, &ranks, HooiParams::default()).unwrap();
        for w in out.fit_history.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
        // the core carries all the captured energy
        let e = out.estimate.frobenius_norm();
        prop_assert!((e - out.fit_history.last().unwrap()).abs() <= 1e-9 * e.max(1.0));
    }

    #[test]
    fn resolved_ranks_stay_in_range(c in 0.01f64..20.0, exponent in 1u32..4, dims in prop::collection::vec(1usize..40, 3)) {
        let ranks = RankRule::log(c, exponent).unwrap().resolve(&dims).unwrap();
        for (r, d) in ranks.iter().zip(&dims) {
            prop_assert!(*r >= 1 && r <= d);
        }
    }

    #[test]
    fn kmeans_wcss_matches_labels(n in 3usize..30, p in 1usize..4, k in 1usize..4, seed in 0u64..500) {
        prop_assume!(k <= n);
        let mut rng = rng_from_seed(seed);
        let data = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = kmeans(&data, k, 2, 50, seed).unwrap();
        prop_assert_eq!(a.labels.len(), n);
        prop_assert!(a.labels.iter().all(|&l| l < k));
        prop_assert!((wcss(&data, &a.labels, &a.centroids) - a.wcss).abs() < 1e-9);
        let b = kmeans(&data, k, 2, 50, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn dse_beats_noise_on_tucker_signal() {
    let dims = [25, 25, 25];
    let theta = generate_signal(&LatentModel::random_tucker(&dims, &[2, 2, 2], 4).unwrap(), &dims).unwrap();
    let y = add_noise(&theta, &NoiseSpec::gaussian(1.0, 5).unwrap()).unwrap();
    let est = dse(&y, &[2, 2, 2]).unwrap().estimate;
    let input_mse = lvtensor::mse(&y, &theta).unwrap();
    let est_mse = lvtensor::mse(&est, &theta).unwrap();
    assert!(est_mse < 0.05 * input_mse, "{est_mse} vs {input_mse}");
}
