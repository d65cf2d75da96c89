//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{all_indices, integer_matrix, integer_tensor, max_abs_diff, mode_product_oracle, sign_test_p, unfold_column};
use lvtensor::clustering::{cluster_mode, matched_agreement, ClusterParams};
use lvtensor::estimators::{approx_lse, dse, hooi, HooiParams, RankRule};
use lvtensor::experiments::{run_experiment, ExperimentKind, ExperimentResult, ExperimentSpec, Profile, RankChoice};
use lvtensor::generators::{add_noise, generate_signal, planted_blocks, LatentModel, ModelId, NoiseSpec};
use lvtensor::linalg::{svd_full, svd_top_left};
use lvtensor::rank_analysis::{logrank_scan, median_ranks, RankScanConfig};
use lvtensor::rng::{derive_seed, rng_from_seed};
use lvtensor::tensor::relative_error;
use lvtensor::{DenseTensor, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn exact_recovery() -> Outcome {
    let d = 50;
    let theta = generate_signal(&LatentModel::random_tucker(&[d, d, d], &[3, 3, 3], 11).unwrap(), &[d, d, d]).unwrap();
    let ranks = [3, 3, 3];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut run = |name: &str, f: &dyn Fn() -> DenseTensor| {
        let start = Instant::now();
        let est = f();
        let t = secs(start.elapsed());
        let err = relative_error(&est, &theta).unwrap();
        pass &= err < 1e-8 && t < 10.0;
        parts.push(format!("{name} err {err:.1e} in {t:.2}s"));
    };
    run("dse", &|| dse(&theta, &ranks).unwrap().estimate);
    run("hooi", &|| hooi(&theta, &ranks, HooiParams::default()).unwrap().estimate);
    run("lse", &|| {
        approx_lse(&theta, &RankRule::Explicit(ranks.to_vec()), 3, 5, HooiParams::default())
            .unwrap()
            .estimate
    });
    outcome(pass, parts.join(", "))
}

fn matrix_degeneration() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = rng_from_seed(seed);
        let a = Matrix::from_fn(60, 80, |_, _| rng.sample::<f64, _>(StandardNormal));
        let full = svd_full(&a).unwrap();
        for r in [1, 3, 5] {
            let est = dse(&DenseTensor::from_matrix(&a), &[r, r]).unwrap().estimate;
            let reference = full.truncated(r);
            worst = worst.max(max_abs_diff(est.values(), reference.values()));
        }
    }
    outcome(worst <= 1e-10, format!("max |dse - truncated svd| = {worst:.1e} over 60 cases"))
}

fn logrank_trend() -> Outcome {
    let start = Instant::now();
    let cfg = RankScanConfig {
        epsilon: 0.01,
        r_max: 20,
        d_grid: vec![20, 60, 100, 140, 200],
        s_grid: vec![5],
        models: vec![ModelId::Model1],
        seeds: (0..3).map(|r| derive_seed(2024, &[r])).collect(),
        hooi: HooiParams::default(),
    };
    let rows = logrank_scan(&cfg).unwrap();
    let med = median_ranks(&rows, cfg.r_max);
    let t = secs(start.elapsed());
    let ranks: Vec<f64> = med.iter().map(|m| m.3).collect();
    let at = |d: usize| med.iter().find(|m| m.2 == d).unwrap().3;
    let monotone = ranks.windows(2).all(|w| w[1] >= w[0]);
    let sublinear = at(200) / 200.0 < 0.25;
    let concave = at(200) - at(100) <= at(100) - at(20) + 2.0;
    outcome(
        monotone && sublinear && concave && t < 900.0,
        format!("median ranks {ranks:?} for d = 20,60,100,140,200 in {t:.0}s"),
    )
}

fn mean_of(res: &ExperimentResult, d: usize, estimator: &str) -> f64 {
    res.summary
        .iter()
        .find(|s| s.d == d && s.estimator == estimator && s.metric == "mse")
        .unwrap()
        .mean
}

fn mse_decay() -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: ModelId::Model1,
        d_grid: vec![40, 100],
        s_grid: vec![2],
        gamma_grid: vec![1.0],
        replicates: 10,
        seed: 7,
        ..ExperimentSpec::preset(ExperimentKind::MseVsD, Profile::Ci)
    };
    let res = run_experiment(&spec).unwrap();
    let t = secs(start.elapsed());
    let (m40, m100) = (mean_of(&res, 40, "dse"), mean_of(&res, 100, "dse"));
    outcome(
        m100 < 0.6 * m40 && t < 1200.0,
        format!("mean mse {m40:.3e} (d=40) -> {m100:.3e} (d=100), ratio {:.3}, {t:.0}s", m100 / m40),
    )
}

fn estimator_ordering() -> Outcome {
    let start = Instant::now();
    let mut mean_ok = true;
    let mut significant = 0;
    let mut parts = Vec::new();
    for model in [ModelId::Model1, ModelId::Model2, ModelId::Model3] {
        let spec = ExperimentSpec {
            model,
            d_grid: vec![60],
            s_grid: vec![2],
            gamma_grid: vec![1.0],
            replicates: 20,
            seed: 3,
            ..ExperimentSpec::preset(ExperimentKind::EstimatorCompare, Profile::Ci)
        };
        let res = run_experiment(&spec).unwrap();
        let per = |est: &str| -> Vec<f64> {
            res.raw
                .iter()
                .filter(|r| r.estimator == est && r.metric == "mse")
                .map(|r| r.value)
                .collect()
        };
        let (dse_v, hosvd_v) = (per("dse"), per("hosvd"));
        let wins = dse_v.iter().zip(&hosvd_v).filter(|(a, b)| a < b).count();
        let ties = dse_v.iter().zip(&hosvd_v).filter(|(a, b)| a == b).count();
        let p = sign_test_p(wins, dse_v.len() - ties);
        let (md, mh) = (mean_of(&res, 60, "dse"), mean_of(&res, 60, "hosvd"));
        mean_ok &= md <= mh;
        if p < 0.05 {
            significant += 1;
        }
        parts.push(format!("{model}: dse {md:.3e} vs hosvd {mh:.3e}, {wins}/20 wins, p={p:.1e}"));
    }
    let t = secs(start.elapsed());
    outcome(
        mean_ok && significant >= 2 && t < 1200.0,
        format!("{}; {t:.0}s", parts.join("; ")),
    )
}

fn denoise_sweep() -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec {
        shape: Some(vec![60, 60, 24]),
        d_grid: vec![60],
        gamma_grid: vec![0.0, 0.5, 1.0],
        rank: RankChoice::Sweep((3..=30).step_by(3).collect()),
        seed: 1,
        ..ExperimentSpec::preset(ExperimentKind::DenoiseRankSweep, Profile::Ci)
    };
    let res = run_experiment(&spec).unwrap();
    let t = secs(start.elapsed());
    let curve = |g: f64| -> Vec<(usize, f64)> {
        res.raw
            .iter()
            .filter(|r| r.gamma == Some(g) && r.estimator == "dse")
            .map(|r| (r.rank.unwrap(), r.value))
            .collect()
    };
    let clean = curve(0.0);
    let noisy = curve(1.0);
    let monotone = clean.windows(2).all(|w| w[1].1 <= w[0].1);
    let argmin = noisy.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    outcome(
        monotone && argmin < 30 && t < 600.0,
        format!(
            "gamma=0 mse {:.1e} -> {:.1e} non-increasing: {monotone}; gamma=1 argmin rank {argmin}; {t:.1}s",
            clean[0].1,
            clean.last().unwrap().1
        ),
    )
}

fn planted_clusters() -> Outcome {
    let start = Instant::now();
    let mut perfect = 0;
    for seed in 0..10 {
        let p = planted_blocks(&[30, 20, 20], &[1.0, 1.5, 2.0], seed).unwrap();
        let y = add_noise(&p.signal, &NoiseSpec::gaussian(0.1, derive_seed(seed, &[1])).unwrap()).unwrap();
        let params = ClusterParams {
            seed,
            ..ClusterParams::default()
        };
        let out = cluster_mode(&y, &RankRule::Explicit(vec![3, 3, 3]), 0, 3, params).unwrap();
        if matched_agreement(&out.assignment.labels, &p.labels).unwrap() == 1.0 {
            perfect += 1;
        }
    }
    let t = secs(start.elapsed());
    outcome(perfect >= 8 && t < 300.0, format!("{perfect}/10 seeds recovered exactly in {t:.1}s"))
}

fn oracle_suite() -> Outcome {
    let start = Instant::now();
    let mut shapes = 0;
    let mut exact = true;
    for order in 1..=4 {
        for dims in all_indices(&vec![3; order]) {
            let dims: Vec<usize> = dims.iter().map(|d| d + 1).collect();
            shapes += 1;
            let t = integer_tensor(&dims, shapes);
            for k in 0..order {
                let u = t.unfold(k).unwrap();
                for idx in all_indices(&dims) {
                    exact &= u.get(idx[k], unfold_column(&idx, &dims, k)) == t.get(&idx);
                }
                exact &= DenseTensor::fold(&u, k, &dims).unwrap() == t;
                let m = integer_matrix(1 + (k + shapes) % 3, dims[k], k);
                exact &= t.mode_product(k, &m).unwrap() == mode_product_oracle(&t, k, &m);
            }
            let mats: Vec<Matrix> = (0..order).map(|k| integer_matrix(2, dims[k], k + 1)).collect();
            let pairs: Vec<(usize, &Matrix)> = mats.iter().enumerate().collect();
            let mut seq = t.clone();
            for (k, m) in &pairs {
                seq = mode_product_oracle(&seq, *k, m);
            }
            exact &= t.multilinear_multiply(&pairs).unwrap() == seq;
        }
    }

    let mut ey_worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = rng_from_seed(100 + seed);
        let a = Matrix::from_fn(30, 20, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sv = svd_full(&a).unwrap().singular_values;
        for r in [1, 5, 10] {
            let u = svd_top_left(&a, r).unwrap();
            let resid = a.sub(&u.matmul(&u.t_matmul(&a).unwrap()).unwrap()).unwrap().frobenius_norm().powi(2);
            let tail: f64 = sv[r..].iter().map(|s| s * s).sum();
            ey_worst = ey_worst.max((resid - tail).abs() / tail);
        }
    }

    let mut hooi_ok = true;
    for seed in 0..20 {
        let theta =
            generate_signal(&LatentModel::random_tucker(&[12, 10, 8], &[3, 3, 2], seed).unwrap(), &[12, 10, 8]).unwrap();
        let y = add_noise(&theta, &NoiseSpec::gaussian(0.5, seed + 1000).unwrap()).unwrap();
        let out = hooi(&y, &[3, 3, 2], HooiParams::default()).unwrap();
        hooi_ok &= out.fit_history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    }
    let t = secs(start.elapsed());
    outcome(
        exact && ey_worst <= 1e-9 && hooi_ok && t < 120.0,
        format!(
            "{shapes} shapes exact: {exact}; eckart-young rel dev {ey_worst:.1e}; hooi monotone: {hooi_ok}; {t:.1}s"
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lvtensor"))
        .current_dir(dir)
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("generate", vec!["generate", "--model", "model2", "--d", "16", "--gamma", "0.5", "--seed", "4", "--out", "g.dtf1"], vec!["g.dtf1"]),
        ("denoise", vec!["denoise", "--input", "in.dtf1", "--rank-c", "0.5,1,2", "--out", "d.dtf1"], vec!["d.dtf1"]),
        ("rank-scan", vec!["rank-scan", "--d", "12,16", "--s", "2", "--replicates", "2", "--out", "s.csv"], vec!["s.csv"]),
        ("bench", vec!["bench", "--kind", "estimator-compare", "--d", "14", "--replicates", "2", "--out", "b.csv"], vec!["b.csv", "b.summary.csv"]),
        ("cluster", vec!["cluster", "--input", "in.dtf1", "--k", "3", "--rank", "3", "--elbow", "4", "--out", "c.csv"], vec!["c.csv", "c.elbow.csv"]),
        ("cv-rank", vec!["cv-rank", "--input", "in.dtf1", "--out", "v.csv"], vec!["v.csv"]),
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        if !run_cli(d.path(), &["generate", "--model", "chc", "--d", "18", "--s", "3", "--gamma", "0.2", "--seed", "9", "--out", "in.dtf1"]) {
            return outcome(false, "could not generate the shared input".into());
        }
    }
    let mut failed = Vec::new();
    for (name, args, outputs) in &runs {
        let ok = dirs.iter().all(|d| run_cli(d.path(), args));
        let same = ok
            && outputs.iter().all(|f| {
                let a = std::fs::read(dirs[0].path().join(f));
                let b = std::fs::read(dirs[1].path().join(f));
                matches!((a, b), (Ok(a), Ok(b)) if a == b && !a.is_empty())
            });
        if !same {
            failed.push(*name);
        }
    }
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} subcommands byte-identical across two runs", runs.len())
        } else {
            format!("differing or failing: {failed:?}")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact recovery", exact_recovery),
        ("matrix degeneration", matrix_degeneration),
        ("log-rank trend", logrank_trend),
        ("mse decay", mse_decay),
        ("estimator ordering", estimator_ordering),
        ("denoise rank sweep", denoise_sweep),
        ("planted clusters", planted_clusters),
        ("oracle equivalence", oracle_suite),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|p| *p == id || name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!("acceptance {id} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
