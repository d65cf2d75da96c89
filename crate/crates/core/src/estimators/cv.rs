//! Entrywise K-fold cross-validation of the log-rule constant `c`.
//!
//! Entry positions are shuffled and dealt into folds. For each fold the held-out
//! entries are replaced by the grand mean of the retained ones, DSE runs at every
//! candidate rank, and the score is the MSE on the held-out positions against
//! their observed values.

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{dse_with, ModeSpectra, RankRule};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::DenseTensor;

/// Score ties within this margin go to the smaller constant.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub c: f64,
    /// `None` when the candidate was skipped.
    pub ranks: Option<Vec<usize>>,
    pub fold_scores: Vec<f64>,
    pub mean_score: Option<f64>,
    /// Empty for evaluated candidates, else the reason for skipping.
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub best_c: f64,
    pub ranks: Vec<usize>,
    pub table: Vec<CvRow>,
}

/// Picks `c` from `c_grid` for the rule `r = ceil(c · ln^s_exponent(d̄))`.
///
/// Candidates whose rank would exceed the smallest extent (or with `c ≤ 0`)
/// are skipped and noted in the table; if all are skipped this is an error.
pub fn select_rank_cv(
    y: &DenseTensor,
    c_grid: &[f64],
    s_exponent: u32,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if c_grid.is_empty() {
        return Err(Error::arg("c grid is empty"));
    }
    if folds < 2 {
        return Err(Error::arg("need at least 2 folds"));
    }
    if s_exponent < 1 {
        return Err(Error::arg("rank exponent must be >= 1"));
    }
    if y.order() < 2 {
        return Err(Error::arg("cross-validation needs an order >= 2 tensor"));
    }
    let n = y.len();
    if folds > n {
        return Err(Error::arg(format!("{folds} folds for {n} entries")));
    }
    let dmin = *y.dims().iter().min().expect("order >= 1");

    let mut table: Vec<CvRow> = c_grid
        .iter()
        .map(|&c| {
            let mut row = CvRow {
                c,
                ranks: None,
                fold_scores: Vec::new(),
                mean_score: None,
                note: String::new(),
            };
            if !(c > 0.0) || !c.is_finite() {
                row.note = format!("skipped: constant {c} is not positive");
            } else {
                let r = RankRule::log_rank(c, s_exponent, y.dims()).max(1);
                if r > dmin {
                    row.note = format!("skipped: rank {r} exceeds smallest extent {dmin}");
                } else {
                    row.ranks = Some(vec![r; y.order()]);
                }
            }
            if !row.note.is_empty() {
                warn!("cv candidate c={c}: {}", row.note);
            }
            row
        })
        .collect();
    if table.iter().all(|r| r.ranks.is_none()) {
        return Err(Error::arg("every candidate in the c grid was skipped"));
    }

    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng_from_seed(seed));
    let mut fold_of = vec![0usize; n];
    for (p, &pos) in positions.iter().enumerate() {
        fold_of[pos] = p % folds;
    }

    let candidate_ranks: Vec<Option<Vec<usize>>> = table.iter().map(|r| r.ranks.clone()).collect();
    let per_fold: Vec<Vec<Option<f64>>> = (0..folds)
        .into_par_iter()
        .map(|fold| score_fold(y, &fold_of, fold, &candidate_ranks))
        .collect::<Result<_>>()?;

    for (i, row) in table.iter_mut().enumerate() {
        if row.ranks.is_some() {
            row.fold_scores = per_fold.iter().map(|f| f[i].expect("evaluated")).collect();
            row.mean_score = Some(row.fold_scores.iter().sum::<f64>() / folds as f64);
        }
    }

    let best_score = table
        .iter()
        .filter_map(|r| r.mean_score)
        .fold(f64::INFINITY, f64::min);
    let best = table
        .iter()
        .filter(|r| matches!(r.mean_score, Some(s) if s <= best_score + TIE_TOLERANCE))
        .min_by(|a, b| a.c.total_cmp(&b.c))
        .expect("at least one evaluated candidate");
    Ok(CvOutcome {
        best_c: best.c,
        ranks: best.ranks.clone().expect("evaluated"),
        table,
    })
}

fn score_fold(
    y: &DenseTensor,
    fold_of: &[usize],
    fold: usize,
    candidates: &[Option<Vec<usize>>],
) -> Result<Vec<Option<f64>>> {
    let (sum, count) = y
        .values()
        .iter()
        .zip(fold_of)
        .filter(|(_, &f)| f != fold)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    let fill = if count > 0 { sum / count as f64 } else { 0.0 };
    let mut imputed = y.clone();
    for (v, &f) in imputed.values_mut().iter_mut().zip(fold_of) {
        if f == fold {
            *v = fill;
        }
    }
    let spectra = ModeSpectra::compute(&imputed)?;
    candidates
        .iter()
        .map(|ranks| {
            let Some(ranks) = ranks else { return Ok(None) };
            let est = dse_with(&imputed, &spectra, ranks)?.estimate;
            let (ss, held) = est
                .values()
                .iter()
                .zip(y.values())
                .zip(fold_of)
                .filter(|(_, &f)| f == fold)
                .fold((0.0, 0usize), |(s, c), ((e, o), _)| (s + (e - o) * (e - o), c + 1));
            Ok(Some(ss / held.max(1) as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{add_noise, NoiseSpec};

    #[test]
    fn singleton_grid() {
        let y = add_noise(&DenseTensor::zeros(&[8, 8, 8]).unwrap(), &NoiseSpec::gaussian(1.0, 3).unwrap()).unwrap();
        let out = select_rank_cv(&y, &[0.7], 1, 3, 1).unwrap();
        assert_eq!(out.best_c, 0.7);
        // ceil(0.7 * ln 8) = ceil(1.456) = 2
        assert_eq!(out.ranks, vec![2, 2, 2]);
        assert_eq!(out.table.len(), 1);
        assert_eq!(out.table[0].fold_scores.len(), 3);
    }

    #[test]
    fn infeasible_candidates_are_skipped() {
        let y = add_noise(&DenseTensor::zeros(&[6, 6, 6]).unwrap(), &NoiseSpec::gaussian(1.0, 3).unwrap()).unwrap();
        let out = select_rank_cv(&y, &[-1.0, 0.5, 10.0], 1, 2, 1).unwrap();
        assert_eq!(out.best_c, 0.5);
        assert!(out.table[0].note.starts_with("skipped"));
        assert!(out.table[2].note.starts_with("skipped"));
        assert!(select_rank_cv(&y, &[10.0], 1, 2, 1).is_err());
        assert!(select_rank_cv(&y, &[], 1, 2, 1).is_err());
        assert!(select_rank_cv(&y, &[1.0], 1, 1, 1).is_err());
    }
}
