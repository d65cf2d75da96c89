//! Tucker-PCA clustering along one mode.
//!
//! With `Θ̂ = Ĉ ×_1 Û_1 .. ×_m Û_m`, the rows of `Û_k · Unfold_k(Ĉ)` are the
//! mode-k principal components (the Kronecker product of the other factors
//! supplies orthonormal principal axes). K-means runs on those rows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{dse, hooi_from, HooiParams, RankRule, TuckerFactorization};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};
use crate::tensor::{DenseTensor, Matrix};
use rand::Rng;

/// K-means output. Labels are canonical: clusters are numbered by decreasing
/// size, ties broken by smallest member row.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `k × p` centroid matrix.
    pub centroids: Matrix,
    pub wcss: f64,
    pub k: usize,
}

/// `Û_mode · Unfold_mode(Ĉ)`, a `d_mode × (r_*/r_mode)` matrix.
pub fn mode_principal_components(fact: &TuckerFactorization, mode: usize) -> Result<Matrix> {
    if mode >= fact.factors().len() {
        return Err(Error::arg(format!(
            "mode {} out of range for an order-{} factorization",
            mode + 1,
            fact.factors().len()
        )));
    }
    fact.factors()[mode].matmul(&fact.core().unfold(mode)?)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(data: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..data.rows()).map(|i| nearest(data.row(i), centroids).0).collect()
}

fn means(data: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let p = data.cols();
    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l * p..(l + 1) * p].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            sums[j * p..(j + 1) * p].iter_mut().for_each(|s| *s /= c as f64);
        }
    }
    (Matrix::new(k, p, sums).expect("k, p > 0"), counts)
}

/// Means of the current labels. An empty cluster takes over the point farthest
/// from its own centroid (among clusters with at least two members).
fn update(data: &Matrix, labels: &mut [usize], k: usize) -> Matrix {
    loop {
        let (centroids, counts) = means(data, labels, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for i in 0..data.rows() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(data.row(i), centroids.row(labels[i]));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= rows leaves a cluster with two members");
        labels[i] = empty;
    }
}

/// Within-cluster sum of squares of `labels` around `centroids`.
pub fn wcss(data: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(data.row(i), centroids.row(l)))
        .sum()
}

#[derive(Clone, Debug)]
pub(crate) struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub wcss: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub history: Vec<f64>,
}

pub(crate) fn lloyd(data: &Matrix, init: Matrix, max_iters: usize) -> LloydRun {
    let k = init.rows();
    let mut labels = assign(data, &init);
    let mut history = Vec::new();
    let mut t = 0;
    loop {
        let centroids = update(data, &mut labels, k);
        let w = wcss(data, &labels, &centroids);
        history.push(w);
        t += 1;
        let next = assign(data, &centroids);
        if t >= max_iters || next == labels {
            return LloydRun {
                labels,
                centroids,
                wcss: w,
                history,
            };
        }
        labels = next;
    }
}

fn kmeans_pp(data: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            // all remaining points coincide with a center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(data.row(i), data.row(pick)));
        }
    }
    Matrix::from_fn(k, data.cols(), |j, c| data.get(chosen[j], c))
}

fn canonical(data: &Matrix, run: LloydRun) -> ClusterAssignment {
    let k = run.centroids.rows();
    let mut sizes = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &l) in run.labels.iter().enumerate() {
        sizes[l] += 1;
        first[l] = first[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let labels: Vec<usize> = run.labels.iter().map(|&l| relabel[l]).collect();
    let centroids = Matrix::from_fn(k, run.centroids.cols(), |j, c| run.centroids.get(order[j], c));
    let w = wcss(data, &labels, &centroids);
    ClusterAssignment {
        labels,
        centroids,
        wcss: w,
        k,
    }
}

fn check_kmeans_args(data: &Matrix, k: usize, restarts: usize, max_iters: usize) -> Result<()> {
    if k == 0 || k > data.rows() {
        return Err(Error::arg(format!(
            "k = {k} must lie in [1, {}] (number of rows)",
            data.rows()
        )));
    }
    if restarts < 1 || max_iters < 1 {
        return Err(Error::arg("restarts and max_iters must be >= 1"));
    }
    if data.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("k-means input has non-finite entries"));
    }
    Ok(())
}

fn best_run(data: &Matrix, k: usize, restarts: usize, max_iters: usize, seed: u64) -> LloydRun {
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, &[r as u64]));
            (r, lloyd(data, kmeans_pp(data, k, &mut rng), max_iters))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| a.1.wcss.total_cmp(&b.1.wcss).then(a.0.cmp(&b.0)))
        .expect("restarts >= 1")
        .1
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by WCSS.
pub fn kmeans(data: &Matrix, k: usize, restarts: usize, max_iters: usize, seed: u64) -> Result<ClusterAssignment> {
    check_kmeans_args(data, k, restarts, max_iters)?;
    Ok(canonical(data, best_run(data, k, restarts, max_iters, seed)))
}

/// Default Lloyd iteration cap for elbow curves and the clustering pipeline.
pub const DEFAULT_MAX_ITERS: usize = 300;

/// WCSS for each `k` in the grid. Each `k` also tries the best solution at the
/// previous grid value extended by farthest-point seeds, so the curve is
/// non-increasing.
pub fn elbow_curve(data: &Matrix, k_grid: &[usize], restarts: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mut ks = k_grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        check_kmeans_args(data, k, restarts, DEFAULT_MAX_ITERS)?;
    }
    let mut results: Vec<(usize, f64)> = Vec::new();
    let mut prev: Option<Matrix> = None;
    for &k in &ks {
        let mut run = best_run(data, k, restarts, DEFAULT_MAX_ITERS, derive_seed(seed, &[k as u64]));
        if let Some(prev_c) = &prev {
            let warm = lloyd(data, extend_farthest(data, prev_c, k), DEFAULT_MAX_ITERS);
            if warm.wcss < run.wcss {
                run = warm;
            }
        }
        results.push((k, run.wcss));
        prev = Some(run.centroids);
    }
    Ok(k_grid
        .iter()
        .map(|k| *results.iter().find(|(kk, _)| kk == k).expect("computed"))
        .collect())
}

fn extend_farthest(data: &Matrix, centroids: &Matrix, k: usize) -> Matrix {
    let mut rows: Vec<Vec<f64>> = (0..centroids.rows()).map(|j| centroids.row(j).to_vec()).collect();
    while rows.len() < k {
        let mut far = 0;
        let mut far_d = -1.0;
        for i in 0..data.rows() {
            let d = rows
                .iter()
                .map(|c| sq_dist(data.row(i), c))
                .fold(f64::INFINITY, f64::min);
            if d > far_d {
                far_d = d;
                far = i;
            }
        }
        rows.push(data.row(far).to_vec());
    }
    Matrix::from_fn(k, data.cols(), |j, c| rows[j][c])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Refine the DSE subspaces with HOOI before forming components.
    pub refine: bool,
    pub hooi: HooiParams,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            restarts: 10,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            refine: true,
            hooi: HooiParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModeClustering {
    pub assignment: ClusterAssignment,
    pub components: Matrix,
    pub ranks: Vec<usize>,
    pub seed: u64,
    /// "dse+hooi" or "dse".
    pub pipeline: &'static str,
}

/// DSE, optional HOOI refinement, mode-k principal components, then k-means.
pub fn cluster_mode(y: &DenseTensor, rule: &RankRule, mode: usize, k: usize, params: ClusterParams) -> Result<ModeClustering> {
    if mode >= y.order() {
        return Err(Error::arg(format!(
            "mode {} out of range for an order-{} tensor",
            mode + 1,
            y.order()
        )));
    }
    let ranks = rule.resolve(y.dims())?;
    let first = dse(y, &ranks)?;
    let (fact, pipeline) = if params.refine {
        let refined = hooi_from(y, &ranks, first.factorization.factors().to_vec(), params.hooi)?;
        (refined.factorization, "dse+hooi")
    } else {
        (first.factorization, "dse")
    };
    let components = mode_principal_components(&fact, mode)?;
    let assignment = kmeans(&components, k, params.restarts, params.max_iters, params.seed)?;
    Ok(ModeClustering {
        assignment,
        components,
        ranks,
        seed: params.seed,
        pipeline,
    })
}

/// Fraction of rows on which two labelings agree under the best one-to-one
/// matching of label values.
pub fn matched_agreement(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::arg("labelings must be nonempty and of equal length"));
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let k = ka.max(kb);
    if k > 10 {
        return Err(Error::arg("matched agreement supports at most 10 labels"));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        confusion[x][y] += 1;
    }
    fn search(row: usize, used: &mut [bool], confusion: &[Vec<usize>], acc: usize, best: &mut usize) {
        if row == confusion.len() {
            *best = (*best).max(acc);
            return;
        }
        for j in 0..confusion.len() {
            if !used[j] {
                used[j] = true;
                search(row + 1, used, confusion, acc + confusion[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = 0;
    search(0, &mut vec![false; k], &confusion, 0, &mut best);
    Ok(best as f64 / a.len() as f64)
}
