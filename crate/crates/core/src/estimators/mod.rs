//! Spectral estimators for Tucker low-rank signal recovery.
//!
//! * [`hosvd`]: one truncated SVD per unfolding of `Y`, then a single projection.
//! * [`dse`]: double projection. The HOSVD subspaces `Ũ_j` project `Y` on every
//!   mode except `k` before the second SVD that yields `Û_k`; the estimate is
//!   `Y ×_1 Û_1Û_1^T .. ×_m Û_mÛ_m^T`.
//! * [`hooi`]: alternating refinement of the subspaces until the core norm stops
//!   growing. It is a local solver for the rank-constrained least-squares fit;
//!   [`approx_lse`] runs it from several starts and keeps the best residual.

use std::fmt;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{left_spectrum, left_spectrum_from_gram, random_orthonormal, LeftSpectrum, GRAM_LIMIT};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{DenseTensor, Matrix};

pub mod cv;

pub use cv::{select_rank_cv, CvOutcome, CvRow};

/// Core tensor plus one orthonormal factor per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerFactorization {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerFactorization {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::arg("need one factor per core mode"));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.cols() != core.dims()[k] {
                return Err(Error::arg(format!(
                    "factor {} is {}x{} but core extent is {}",
                    k + 1,
                    f.rows(),
                    f.cols(),
                    core.dims()[k]
                )));
            }
            if f.orthonormality_defect() > 1e-8 {
                return Err(Error::arg(format!("factor {} is not orthonormal", k + 1)));
            }
        }
        Ok(TuckerFactorization { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    /// `core ×_1 U_1 .. ×_m U_m`
    pub fn reconstruct(&self) -> DenseTensor {
        let pairs: Vec<(usize, &Matrix)> = self.factors.iter().enumerate().collect();
        self.core
            .multilinear_multiply(&pairs)
            .expect("factor shapes validated at construction")
    }
}

/// How approximation ranks are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum RankRule {
    /// One rank per mode.
    Explicit(Vec<usize>),
    /// `r = ceil(c · ln^exponent(d̄))` on every mode, `d̄` the largest extent.
    Log { c: f64, exponent: u32 },
}

impl RankRule {
    pub fn log(c: f64, exponent: u32) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::arg(format!("rank constant must be positive, got {c}")));
        }
        if exponent < 1 {
            return Err(Error::arg("rank exponent must be >= 1"));
        }
        Ok(RankRule::Log { c, exponent })
    }

    /// Uncapped log-rule rank for the given extents.
    pub fn log_rank(c: f64, exponent: u32, dims: &[usize]) -> usize {
        let dmax = *dims.iter().max().unwrap_or(&1) as f64;
        let raw = c * dmax.ln().powi(exponent as i32);
        raw.ceil().max(0.0) as usize
    }

    /// Per-mode ranks, clamped to `[1, d_k]` with a logged warning.
    pub fn resolve(&self, dims: &[usize]) -> Result<Vec<usize>> {
        let wanted = match self {
            RankRule::Explicit(r) => {
                if r.len() != dims.len() {
                    return Err(Error::arg(format!(
                        "{} ranks given for an order-{} tensor",
                        r.len(),
                        dims.len()
                    )));
                }
                r.clone()
            }
            RankRule::Log { c, exponent } => {
                if !(*c > 0.0) {
                    return Err(Error::arg("rank constant must be positive"));
                }
                vec![Self::log_rank(*c, *exponent, dims); dims.len()]
            }
        };
        Ok(wanted
            .iter()
            .zip(dims)
            .enumerate()
            .map(|(k, (&r, &d))| {
                let clamped = r.clamp(1, d);
                if clamped != r {
                    warn!("rank {r} on mode {} clamped to {clamped} (extent {d})", k + 1);
                }
                clamped
            })
            .collect())
    }
}

impl fmt::Display for RankRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankRule::Explicit(r) => {
                let parts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                write!(f, "explicit({})", parts.join(","))
            }
            RankRule::Log { c, exponent } => write!(f, "log(c={c},exponent={exponent})"),
        }
    }
}

/// Estimated signal with the factorization it came from.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub estimate: DenseTensor,
    pub factorization: TuckerFactorization,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HooiParams {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HooiParams {
    fn default() -> Self {
        HooiParams {
            max_iters: 50,
            tol: 1e-7,
        }
    }
}

impl HooiParams {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::arg("max_iters must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::arg("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HooiOutcome {
    pub estimate: DenseTensor,
    pub factorization: TuckerFactorization,
    pub iterations: usize,
    /// `‖core‖_F` after initialization and after every sweep.
    pub fit_history: Vec<f64>,
}

pub(crate) fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::arg(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (k, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::arg(format!(
                "rank {r} on mode {} outside [1, {d}]",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Left spectrum of a mode unfolding without forming the Kolda–Bader layout.
pub(crate) fn mode_spectrum(t: &DenseTensor, mode: usize) -> Result<LeftSpectrum> {
    if t.dims()[mode] <= GRAM_LIMIT {
        left_spectrum_from_gram(&t.mode_gram(mode)?)
    } else {
        left_spectrum(&t.mode_major(mode)?)
    }
}

/// Left spectra of every unfolding of one tensor; HOSVD subspaces at any rank
/// are leading columns of these.
#[derive(Clone, Debug)]
pub struct ModeSpectra {
    spectra: Vec<LeftSpectrum>,
    dims: Vec<usize>,
}

impl ModeSpectra {
    pub fn compute(y: &DenseTensor) -> Result<Self> {
        let spectra = (0..y.order())
            .map(|k| mode_spectrum(y, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeSpectra {
            spectra,
            dims: y.dims().to_vec(),
        })
    }

    pub fn singular_values(&self, mode: usize) -> &[f64] {
        self.spectra[mode].singular_values()
    }

    /// HOSVD factors `Ũ_k = SVD_{r_k}(Unfold_k(Y))`.
    pub fn factors(&self, ranks: &[usize]) -> Result<Vec<Matrix>> {
        check_ranks(&self.dims, ranks)?;
        self.spectra
            .iter()
            .zip(ranks)
            .map(|(s, &r)| s.top(r))
            .collect()
    }
}

/// `y ×_{j≠skip} U_j^T`, applied in the order that shrinks the tensor fastest.
pub(crate) fn project_except(y: &DenseTensor, factors: &[Matrix], skip: Option<usize>) -> Result<DenseTensor> {
    let transposed: Vec<(usize, Matrix)> = factors
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .map(|(k, u)| (k, u.transpose()))
        .collect();
    let pairs: Vec<(usize, &Matrix)> = transposed.iter().map(|(k, u)| (*k, u)).collect();
    y.multilinear_multiply(&pairs)
}

/// Projects `y` onto the factor subspaces. Modes whose factor is square are
/// left untouched in the estimate, so full ranks reproduce `y` exactly.
pub(crate) fn project_onto(y: &DenseTensor, factors: Vec<Matrix>) -> Result<Estimate> {
    let core = project_except(y, &factors, None)?;
    let full: Vec<bool> = factors.iter().map(|u| u.rows() == u.cols()).collect();
    let estimate = if full.iter().all(|&f| f) {
        y.clone()
    } else {
        let truncated: Vec<Matrix> = factors
            .iter()
            .zip(&full)
            .filter(|(_, &f)| !f)
            .map(|(u, _)| u.transpose())
            .collect();
        let modes: Vec<usize> = (0..factors.len()).filter(|&k| !full[k]).collect();
        let down: Vec<(usize, &Matrix)> = modes.iter().copied().zip(truncated.iter()).collect();
        let partial = y.multilinear_multiply(&down)?;
        let up: Vec<(usize, &Matrix)> = modes.iter().map(|&k| (k, &factors[k])).collect();
        partial.multilinear_multiply(&up)?
    };
    Ok(Estimate {
        estimate,
        factorization: TuckerFactorization { core, factors },
    })
}

/// Higher-order SVD at the given ranks.
pub fn hosvd(y: &DenseTensor, ranks: &[usize]) -> Result<Estimate> {
    check_ranks(y.dims(), ranks)?;
    hosvd_with(y, &ModeSpectra::compute(y)?, ranks)
}

pub fn hosvd_with(y: &DenseTensor, spectra: &ModeSpectra, ranks: &[usize]) -> Result<Estimate> {
    project_onto(y, spectra.factors(ranks)?)
}

/// Double-projection spectral estimator.
pub fn dse(y: &DenseTensor, ranks: &[usize]) -> Result<Estimate> {
    if y.order() < 2 {
        return Err(Error::arg("double projection needs an order >= 2 tensor"));
    }
    check_ranks(y.dims(), ranks)?;
    dse_with(y, &ModeSpectra::compute(y)?, ranks)
}

/// [`dse`] reusing precomputed first-stage spectra of `y`.
pub fn dse_with(y: &DenseTensor, spectra: &ModeSpectra, ranks: &[usize]) -> Result<Estimate> {
    if y.order() < 2 {
        return Err(Error::arg("double projection needs an order >= 2 tensor"));
    }
    let first = spectra.factors(ranks)?;
    let second = (0..y.order())
        .map(|k| {
            let projected = project_except(y, &first, Some(k))?;
            mode_spectrum(&projected, k)?.top(ranks[k])
        })
        .collect::<Result<Vec<_>>>()?;
    project_onto(y, second)
}

/// HOOI from HOSVD initialization.
pub fn hooi(y: &DenseTensor, ranks: &[usize], params: HooiParams) -> Result<HooiOutcome> {
    params.validate()?;
    check_ranks(y.dims(), ranks)?;
    let init = ModeSpectra::compute(y)?.factors(ranks)?;
    hooi_from(y, ranks, init, params)
}

/// HOOI from explicit orthonormal starting factors. Sweeps update modes in
/// ascending order, each with the latest factors of the other modes.
pub fn hooi_from(y: &DenseTensor, ranks: &[usize], init: Vec<Matrix>, params: HooiParams) -> Result<HooiOutcome> {
    params.validate()?;
    check_ranks(y.dims(), ranks)?;
    if init.len() != y.order()
        || init
            .iter()
            .zip(y.dims().iter().zip(ranks))
            .any(|(u, (&d, &r))| u.shape() != (d, r))
    {
        return Err(Error::arg("initial factors do not match dims and ranks"));
    }
    let mut factors = init;
    let mut fit = project_except(y, &factors, None)?.frobenius_norm();
    let mut history = vec![fit];
    let mut iterations = 0;
    for _ in 0..params.max_iters {
        iterations += 1;
        let mut core_norm = fit;
        for k in 0..y.order() {
            let projected = project_except(y, &factors, Some(k))?;
            factors[k] = mode_spectrum(&projected, k)?.top(ranks[k])?;
            if k + 1 == y.order() {
                core_norm = projected
                    .mode_product(k, &factors[k].transpose())?
                    .frobenius_norm();
            }
        }
        let prev = fit;
        fit = core_norm;
        history.push(fit);
        let change = if prev > 0.0 {
            (fit - prev).abs() / prev
        } else if fit == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if change < params.tol {
            break;
        }
    }
    let Estimate {
        estimate,
        factorization,
    } = project_onto(y, factors)?;
    Ok(HooiOutcome {
        estimate,
        factorization,
        iterations,
        fit_history: history,
    })
}

#[derive(Clone, Debug)]
pub struct LseOutcome {
    pub estimate: DenseTensor,
    pub factorization: TuckerFactorization,
    pub ranks: Vec<usize>,
    pub residual: f64,
    /// 0 is the HOSVD start; `i > 0` the i-th random start.
    pub winning_start: usize,
}

/// Heuristic rank-constrained least squares: best-of-`restarts` HOOI, one start
/// from HOSVD and the rest from random orthonormal factors. Exact minimization
/// is NP-hard; this only returns a local optimum.
pub fn approx_lse(
    y: &DenseTensor,
    rule: &RankRule,
    restarts: usize,
    seed: u64,
    params: HooiParams,
) -> Result<LseOutcome> {
    if restarts < 1 {
        return Err(Error::arg("restarts must be >= 1"));
    }
    params.validate()?;
    let ranks = rule.resolve(y.dims())?;
    let hosvd_init = ModeSpectra::compute(y)?.factors(&ranks)?;
    let candidates = (0..restarts)
        .into_par_iter()
        .map(|start| {
            let init = if start == 0 {
                hosvd_init.clone()
            } else {
                let mut rng = rng_from_seed(derive_seed(seed, &[start as u64]));
                y.dims()
                    .iter()
                    .zip(&ranks)
                    .map(|(&d, &r)| random_orthonormal(d, r, &mut rng))
                    .collect::<Result<Vec<_>>>()?
            };
            let out = hooi_from(y, &ranks, init, params)?;
            let residual = y.sub(&out.estimate)?.frobenius_norm();
            Ok((start, residual, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let (winning_start, residual, best) = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    Ok(LseOutcome {
        estimate: best.estimate,
        factorization: best.factorization,
        ranks,
        residual,
        winning_start,
    })
}
