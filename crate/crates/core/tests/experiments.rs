use lvtensor::estimators::RankRule;
use lvtensor::experiments::{cell_signal, denoise_file, DenoiseRank};
use lvtensor::generators::{add_noise, noise_sigma_for_level, ModelId, NoiseSpec};
use lvtensor::io::{read_dtf1, write_dtf1};
use lvtensor::mse;

#[test]
fn denoising_a_noisy_volume_beats_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let dims = [30, 30, 12];
    let clean = cell_signal(ModelId::Smooth, 4, &dims, 2).unwrap();
    let sigma = noise_sigma_for_level(&clean, 1.0).unwrap();
    let y = add_noise(&clean, &NoiseSpec::gaussian(sigma, 3).unwrap()).unwrap();
    let input = dir.path().join("y.dtf1");
    let first = dir.path().join("d1.dtf1");
    let second = dir.path().join("d2.dtf1");
    write_dtf1(&input, &y).unwrap();
    let rule = DenoiseRank::Rule(RankRule::Explicit(vec![5, 5, 5]));
    denoise_file(&input, &rule, &first).unwrap();
    let d1 = read_dtf1(&first).unwrap();
    assert!(mse(&d1, &clean).unwrap() < 0.2 * mse(&y, &clean).unwrap());

    // a second pass is a projection of a projection
    denoise_file(&first, &rule, &second).unwrap();
    let d2 = read_dtf1(&second).unwrap();
    assert!(d2.sub(&d1).unwrap().frobenius_norm() < 1e-6 * d1.frobenius_norm());
}

#[test]
fn cross_validated_denoising_reports_constant() {
    let dir = tempfile::tempdir().unwrap();
    let theta = cell_signal(ModelId::Model1, 2, &[16, 16, 16], 1).unwrap();
    let y = add_noise(&theta, &NoiseSpec::gaussian(0.5, 2).unwrap()).unwrap();
    let input = dir.path().join("y.dtf1");
    write_dtf1(&input, &y).unwrap();
    let rank = DenoiseRank::Cv {
        c_grid: vec![0.5, 1.0],
        exponent: 1,
        folds: 3,
        seed: 4,
    };
    let rep = denoise_file(&input, &rank, &dir.path().join("o.dtf1")).unwrap();
    assert!(rep.c == Some(0.5) || rep.c == Some(1.0));
    assert!(rep.render().contains("cv_c"));
}
