//! Numerical ε-rank and log-rank scaling scans.
//!
//! The ε-rank of `Θ` is the smallest `r` such that some tensor of Tucker rank
//! at most `(r, .., r)` is within relative Frobenius error `ε`. It is estimated
//! by projecting with HOOI at each `r` (started from HOSVD) and thresholding the
//! running minimum of the error curve, since a rank-`r` fit is also a candidate
//! at every larger rank.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{hooi_from, HooiParams, ModeSpectra};
use crate::generators::{generate_signal, LatentModel, ModelId};
use crate::rng::{derive_seed, label_hash};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonRank {
    pub rank: Option<usize>,
    /// Smoothed relative error at the returned rank, or at the last scanned rank.
    pub error_at_rank: f64,
    /// Raw `(r, ‖Θ − X_r‖_F / ‖Θ‖_F)` for every scanned `r`; the scan stops at
    /// the first rank that meets `ε`.
    pub curve: Vec<(usize, f64)>,
}

/// Scans `r = 1..=r_max` (per-mode ranks capped at the extents).
pub fn epsilon_rank(theta: &DenseTensor, epsilon: f64, r_max: usize, params: HooiParams) -> Result<EpsilonRank> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if r_max < 1 {
        return Err(Error::arg("r_max must be >= 1"));
    }
    let norm = theta.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::arg("relative error is undefined for a zero tensor"));
    }
    let spectra = ModeSpectra::compute(theta)?;
    let mut curve = Vec::new();
    let mut smoothed = f64::INFINITY;
    for r in 1..=r_max {
        let ranks: Vec<usize> = theta.dims().iter().map(|&d| r.min(d)).collect();
        let init = spectra.factors(&ranks)?;
        let fit = hooi_from(theta, &ranks, init, params)?;
        let err = theta.sub(&fit.estimate)?.frobenius_norm() / norm;
        curve.push((r, err));
        smoothed = smoothed.min(err);
        if smoothed <= epsilon {
            return Ok(EpsilonRank {
                rank: Some(r),
                error_at_rank: smoothed,
                curve,
            });
        }
        if ranks.iter().zip(theta.dims()).all(|(r, d)| r == d) {
            break;
        }
    }
    Ok(EpsilonRank {
        rank: None,
        error_at_rank: smoothed,
        curve,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankScanConfig {
    pub epsilon: f64,
    pub r_max: usize,
    pub d_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub models: Vec<ModelId>,
    pub seeds: Vec<u64>,
    pub hooi: HooiParams,
}

impl RankScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::arg("epsilon must lie in (0, 1)"));
        }
        if self.d_grid.is_empty() || self.s_grid.is_empty() || self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::arg("scan grids must be nonempty"));
        }
        if self.d_grid.contains(&0) || self.s_grid.contains(&0) {
            return Err(Error::arg("extents and latent dimensions must be positive"));
        }
        let dmin = *self.d_grid.iter().min().expect("nonempty");
        if self.r_max < 1 || self.r_max > dmin {
            return Err(Error::arg(format!(
                "r_max {} must lie in [1, {dmin}] (smallest extent in the grid)",
                self.r_max
            )));
        }
        if let Some(m) = self.models.iter().find(|m| m.distance_function().is_none()) {
            return Err(Error::arg(format!("rank scans use distance models, got {m}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub model: ModelId,
    pub s: usize,
    pub d: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub rank: Option<usize>,
    pub rel_err: f64,
}

pub const SCAN_HEADER: [&str; 7] = ["model", "s", "d", "seed", "epsilon", "rank", "rel_err"];

/// Seed used to draw the latents of one scan cell.
pub fn scan_cell_seed(model: ModelId, s: usize, d: usize, seed: u64) -> u64 {
    derive_seed(seed, &[label_hash(model.name()), s as u64, d as u64])
}

/// One row per (model, s, d, seed), sorted in that order. Cells that fail are
/// kept with `rank = None`.
pub fn logrank_scan(config: &RankScanConfig) -> Result<Vec<ScanRow>> {
    config.validate()?;
    let mut cells = Vec::new();
    for &model in &config.models {
        for &s in &config.s_grid {
            for &d in &config.d_grid {
                for &seed in &config.seeds {
                    cells.push((model, s, d, seed));
                }
            }
        }
    }
    cells.sort();
    cells.dedup();
    Ok(cells
        .into_par_iter()
        .map(|(model, s, d, seed)| {
            let outcome = scan_cell(model, s, d, seed, config);
            let (rank, rel_err) = match outcome {
                Ok(e) => (e.rank, e.error_at_rank),
                Err(err) => {
                    log::warn!("scan cell {model}/s={s}/d={d}/seed={seed} failed: {err}");
                    (None, f64::NAN)
                }
            };
            ScanRow {
                model,
                s,
                d,
                seed,
                epsilon: config.epsilon,
                rank,
                rel_err,
            }
        })
        .collect())
}

fn scan_cell(model: ModelId, s: usize, d: usize, seed: u64, config: &RankScanConfig) -> Result<EpsilonRank> {
    let f = model.distance_function().expect("validated");
    let m = LatentModel::sample_distance(f, d, s, scan_cell_seed(model, s, d, seed))?;
    let theta = generate_signal(&m, &[d, d, d])?;
    epsilon_rank(&theta, config.epsilon, config.r_max.min(d), config.hooi)
}

/// Median rank per (model, s, d) over seeds. A not-found cell counts as
/// `r_max + 1`.
pub fn median_ranks(rows: &[ScanRow], r_max: usize) -> Vec<(ModelId, usize, usize, f64)> {
    let mut out: Vec<(ModelId, usize, usize, f64)> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let key = (rows[i].model, rows[i].s, rows[i].d);
        let mut vals = Vec::new();
        while i < rows.len() && (rows[i].model, rows[i].s, rows[i].d) == key {
            vals.push(rows[i].rank.unwrap_or(r_max + 1) as f64);
            i += 1;
        }
        out.push((key.0, key.1, key.2, median(&mut vals)));
    }
    out
}

pub fn median(vals: &mut [f64]) -> f64 {
    assert!(!vals.is_empty());
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}
