//! Monte-Carlo campaigns over model, latent dimension, extent and noise grids.
//!
//! Every cell draws its signal and noise from seeds derived from the base seed
//! and the cell coordinates, so adding or removing cells never changes the
//! values of the others. Rows are sorted before they are returned.
//!
//! The `gamma` coordinate is the noise standard deviation for `mse-vs-d` and
//! `estimator-compare`, and the relative noise level `σ_γ = γ‖Θ‖_F/√d_*` for
//! `denoise-rank-sweep`.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::cv::select_rank_cv;
use crate::estimators::{approx_lse, dse, dse_with, hosvd, HooiParams, ModeSpectra, RankRule};
use crate::generators::{
    add_noise, generate_signal, noise_sigma_for_level, planted_blocks, sample_latents, smooth_volume,
    LatentDistribution, LatentModel, ModelId, NoiseSpec,
};
use crate::io::{read_dtf1, write_csv, write_dtf1, Config, Field};
use crate::rank_analysis::{logrank_scan, RankScanConfig};
use crate::rng::{derive_seed, label_hash};
use crate::tensor::{mse, DenseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    LogrankScan,
    MseVsD,
    EstimatorCompare,
    DenoiseRankSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LogrankScan => "logrank-scan",
            ExperimentKind::MseVsD => "mse-vs-d",
            ExperimentKind::EstimatorCompare => "estimator-compare",
            ExperimentKind::DenoiseRankSweep => "denoise-rank-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().replace('_', "-").as_str() {
            "logrank-scan" | "rank-scan" => ExperimentKind::LogrankScan,
            "mse-vs-d" => ExperimentKind::MseVsD,
            "estimator-compare" => ExperimentKind::EstimatorCompare,
            "denoise-rank-sweep" => ExperimentKind::DenoiseRankSweep,
            other => return Err(Error::arg(format!("unknown experiment kind '{other}'"))),
        })
    }
}

/// `ci` keeps extents at or below 60 with 5 replicates; `full` uses the
/// published grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Ci,
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ci" => Ok(Profile::Ci),
            "full" => Ok(Profile::Full),
            other => Err(Error::arg(format!("unknown profile '{other}' (ci or full)"))),
        }
    }
}

/// Default constants searched when the log-rule constant is cross-validated.
pub const DEFAULT_C_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_FOLDS: usize = 5;

/// How each cell picks its Tucker rank.
#[derive(Clone, Debug, PartialEq)]
pub enum RankChoice {
    /// Same ranks in every cell; a single value is used on every mode.
    Explicit(Vec<usize>),
    /// `r = ceil(c · ln^s(d̄))` with the cell's latent dimension `s`.
    LogC(f64),
    /// As `LogC`, with `c` chosen per cell by entrywise cross-validation.
    Cv { c_grid: Vec<f64>, folds: usize },
    /// Equal ranks swept in `denoise-rank-sweep`, capped at each extent.
    Sweep(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub model: ModelId,
    pub d_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub rank: RankChoice,
    pub replicates: usize,
    pub seed: u64,
    /// Replaces the cubic `d × d × d` shape; `d` is then reported as `shape[0]`.
    pub shape: Option<Vec<usize>>,
    pub epsilon: f64,
    pub r_max: usize,
    pub lse_restarts: usize,
    pub hooi: HooiParams,
    pub output: Option<PathBuf>,
}

fn step_grid(from: usize, to: usize, step: usize) -> Vec<usize> {
    (from..=to).step_by(step).collect()
}

impl ExperimentSpec {
    pub fn preset(kind: ExperimentKind, profile: Profile) -> Self {
        let full = profile == Profile::Full;
        let reps = if full { 20 } else { 5 };
        let d_grid = if full { step_grid(20, 200, 20) } else { vec![20, 40, 60] };
        let cv = RankChoice::Cv {
            c_grid: DEFAULT_C_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
        };
        let base = ExperimentSpec {
            kind,
            model: ModelId::Model1,
            d_grid: d_grid.clone(),
            s_grid: vec![2],
            gamma_grid: vec![1.0],
            rank: cv,
            replicates: reps,
            seed: 0,
            shape: None,
            epsilon: 0.01,
            r_max: 20,
            lse_restarts: 3,
            hooi: HooiParams::default(),
            output: None,
        };
        match kind {
            ExperimentKind::LogrankScan => ExperimentSpec {
                s_grid: if full { vec![5, 10, 15] } else { vec![5] },
                gamma_grid: vec![0.0],
                replicates: 3,
                rank: RankChoice::Explicit(vec![]),
                ..base
            },
            ExperimentKind::MseVsD => ExperimentSpec {
                s_grid: if full { vec![1, 2, 3] } else { vec![2] },
                ..base
            },
            ExperimentKind::EstimatorCompare => base,
            ExperimentKind::DenoiseRankSweep => ExperimentSpec {
                model: ModelId::Smooth,
                d_grid: vec![if full { 157 } else { 60 }],
                s_grid: vec![6],
                shape: Some(if full { vec![157, 189, 68] } else { vec![60, 60, 24] }),
                gamma_grid: if full { vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0] } else { vec![0.0, 0.5, 1.0] },
                rank: RankChoice::Sweep(step_grid(3, if full { 60 } else { 30 }, 3)),
                replicates: 1,
                ..base
            },
        }
    }

    /// Starts from the preset of `kind` and `profile` (default `ci`) and applies
    /// the keys `model d s gamma rank rank_c folds replicates seed shape epsilon
    /// r_max lse_restarts out`.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let known = [
            "kind", "profile", "model", "d", "s", "gamma", "rank", "rank_c", "folds", "replicates", "seed", "shape",
            "epsilon", "r_max", "lse_restarts", "out",
        ];
        if let Some(k) = cfg.keys().find(|k| !known.contains(k)) {
            return Err(Error::arg(format!("unknown config key '{k}'")));
        }
        let kind: ExperimentKind = cfg
            .get("kind")?
            .ok_or_else(|| Error::arg("config needs a `kind` key"))?;
        let profile = cfg.get("profile")?.unwrap_or(Profile::Ci);
        let mut spec = ExperimentSpec::preset(kind, profile);
        if let Some(m) = cfg.get("model")? {
            spec.model = m;
        }
        if let Some(d) = cfg.get_list("d")? {
            spec.d_grid = d;
            spec.shape = None;
        }
        if let Some(s) = cfg.get_list("s")? {
            spec.s_grid = s;
        }
        if let Some(g) = cfg.get_list("gamma")? {
            spec.gamma_grid = g;
        }
        let folds = cfg.get("folds")?.unwrap_or(DEFAULT_FOLDS);
        if let Some(r) = cfg.get_list::<usize>("rank")? {
            spec.rank = if kind == ExperimentKind::DenoiseRankSweep {
                RankChoice::Sweep(r)
            } else {
                RankChoice::Explicit(r)
            };
        }
        if let Some(c) = cfg.get_list::<f64>("rank_c")? {
            spec.rank = match c.as_slice() {
                [single] => RankChoice::LogC(*single),
                _ => RankChoice::Cv { c_grid: c, folds },
            };
        } else if let RankChoice::Cv { folds: f, .. } = &mut spec.rank {
            *f = folds;
        }
        if let Some(v) = cfg.get("replicates")? {
            spec.replicates = v;
        }
        if let Some(v) = cfg.get("seed")? {
            spec.seed = v;
        }
        if let Some(shape) = cfg.get_list::<usize>("shape")? {
            spec.d_grid = vec![*shape.first().unwrap_or(&0)];
            spec.shape = Some(shape);
        }
        if let Some(v) = cfg.get("epsilon")? {
            spec.epsilon = v;
        }
        if let Some(v) = cfg.get("r_max")? {
            spec.r_max = v;
        }
        if let Some(v) = cfg.get("lse_restarts")? {
            spec.lse_restarts = v;
        }
        if let Some(out) = cfg.get_str("out") {
            spec.output = Some(PathBuf::from(out));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() || self.s_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(Error::arg("d, s and gamma grids must be nonempty"));
        }
        if self.replicates < 1 {
            return Err(Error::arg("replicates must be >= 1"));
        }
        if self.d_grid.contains(&0) || self.s_grid.contains(&0) {
            return Err(Error::arg("extents and latent dimensions must be positive"));
        }
        if self.gamma_grid.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::arg("noise values must be finite and >= 0"));
        }
        if let Some(shape) = &self.shape {
            if shape.is_empty() || shape.contains(&0) {
                return Err(Error::arg("shape extents must be positive"));
            }
            if self.d_grid.len() != 1 {
                return Err(Error::arg("an explicit shape takes a single d"));
            }
        }
        let sweep = matches!(self.rank, RankChoice::Sweep(_));
        match self.kind {
            ExperimentKind::LogrankScan => {
                if self.model.distance_function().is_none() {
                    return Err(Error::arg("logrank-scan needs a distance model (model1, model2, model3)"));
                }
            }
            ExperimentKind::DenoiseRankSweep => {
                if !sweep {
                    return Err(Error::arg("denoise-rank-sweep needs a rank list"));
                }
            }
            _ => {
                if sweep {
                    return Err(Error::arg(format!("{} takes a single rank choice, not a sweep", self.kind)));
                }
            }
        }
        match &self.rank {
            RankChoice::Explicit(r) | RankChoice::Sweep(r) => {
                if self.kind != ExperimentKind::LogrankScan && (r.is_empty() || r.contains(&0)) {
                    return Err(Error::arg("ranks must be positive"));
                }
            }
            RankChoice::LogC(c) => {
                if !(*c > 0.0) {
                    return Err(Error::arg("rank constant must be positive"));
                }
            }
            RankChoice::Cv { c_grid, folds } => {
                if c_grid.is_empty() || *folds < 2 {
                    return Err(Error::arg("cross-validation needs a c grid and at least 2 folds"));
                }
            }
        }
        Ok(())
    }

    fn cell_dims(&self, d: usize) -> Vec<usize> {
        self.shape.clone().unwrap_or_else(|| vec![d; 3])
    }
}

/// One measurement. `gamma` is absent for rank scans, `rank` is the swept rank
/// of `denoise-rank-sweep` and absent otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub model: ModelId,
    pub s: usize,
    pub d: usize,
    pub gamma: Option<f64>,
    pub rank: Option<usize>,
    pub estimator: &'static str,
    pub replicate: usize,
    pub metric: &'static str,
    /// NaN when the cell failed.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub model: ModelId,
    pub s: usize,
    pub d: usize,
    pub gamma: Option<f64>,
    pub rank: Option<usize>,
    pub estimator: &'static str,
    pub metric: &'static str,
    /// Finite values only.
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `√n`; absent for `n < 2`.
    pub se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellTiming {
    pub cell: String,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub raw: Vec<RawRow>,
    pub summary: Vec<SummaryRow>,
    /// Wall-clock time per cell; kept apart from the deterministic tables.
    pub timings: Vec<CellTiming>,
}

pub const RAW_HEADER: [&str; 10] = [
    "kind", "model", "s", "d", "gamma", "rank", "estimator", "replicate", "metric", "value",
];
pub const SUMMARY_HEADER: [&str; 11] = [
    "kind", "model", "s", "d", "gamma", "rank", "estimator", "metric", "n", "mean", "se",
];

fn opt_cmp<T: Copy>(a: Option<T>, b: Option<T>, f: impl Fn(T, T) -> Ordering) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => f(x, y),
    }
}

fn cell_cmp(a: &RawRow, b: &RawRow) -> Ordering {
    a.model
        .cmp(&b.model)
        .then(a.s.cmp(&b.s))
        .then(a.d.cmp(&b.d))
        .then(opt_cmp(a.gamma, b.gamma, |x, y| x.total_cmp(&y)))
        .then(opt_cmp(a.rank, b.rank, |x, y| x.cmp(&y)))
        .then(a.estimator.cmp(b.estimator))
        .then(a.metric.cmp(b.metric))
}

/// Mean and standard error per cell, over the finite raw values.
pub fn summarize(raw: &[RawRow]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&RawRow> = raw.iter().collect();
    sorted.sort_by(|a, b| cell_cmp(a, b).then(a.replicate.cmp(&b.replicate)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let head = sorted[i];
        let mut vals = Vec::new();
        while i < sorted.len() && cell_cmp(sorted[i], head) == Ordering::Equal {
            if sorted[i].value.is_finite() {
                vals.push(sorted[i].value);
            }
            i += 1;
        }
        let n = vals.len();
        let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let se = (n >= 2).then(|| {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        out.push(SummaryRow {
            model: head.model,
            s: head.s,
            d: head.d,
            gamma: head.gamma,
            rank: head.rank,
            estimator: head.estimator,
            metric: head.metric,
            n,
            mean,
            se,
        });
    }
    out
}

fn dims_key(dims: &[usize]) -> u64 {
    derive_seed(0, &dims.iter().map(|&d| d as u64).collect::<Vec<_>>())
}

fn stream_seed(base: u64, stream: &str, model: ModelId, s: usize, dims: &[usize], extra: &[u64]) -> u64 {
    let mut parts = vec![label_hash(stream), label_hash(model.name()), s as u64, dims_key(dims)];
    parts.extend_from_slice(extra);
    derive_seed(base, &parts)
}

/// Noise-free signal for one cell. `s` is the latent dimension for the
/// distance models, the CP rank, the equal Tucker rank, the number of planted
/// blocks, or the number of blobs of a smooth volume.
pub fn cell_signal(model: ModelId, s: usize, dims: &[usize], seed: u64) -> Result<DenseTensor> {
    match model {
        ModelId::Model1 | ModelId::Model2 | ModelId::Model3 => {
            let f = model.distance_function().expect("distance model");
            let m = if dims.iter().all(|&d| d == dims[0]) {
                LatentModel::sample_distance(f, dims[0], s, seed)?
            } else {
                let latents = dims
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| sample_latents(d, s, LatentDistribution::Unit, derive_seed(seed, &[k as u64])))
                    .collect::<Result<Vec<_>>>()?;
                LatentModel::distance_per_mode(f, latents)?
            };
            generate_signal(&m, dims)
        }
        ModelId::Cp => generate_signal(&LatentModel::random_cp(dims, s, seed)?, dims),
        ModelId::Tucker => generate_signal(&LatentModel::random_tucker(dims, &vec![s; dims.len()], seed)?, dims),
        ModelId::Chc => {
            let amps: Vec<f64> = (1..=s).map(|b| b as f64).collect();
            Ok(planted_blocks(dims, &amps, seed)?.signal)
        }
        ModelId::Smooth => smooth_volume(dims, s, seed),
    }
}

fn resolve_ranks(y: &DenseTensor, choice: &RankChoice, s: usize, seed: u64) -> Result<(Vec<usize>, Option<f64>)> {
    let exponent = u32::try_from(s).map_err(|_| Error::arg("latent dimension too large"))?;
    match choice {
        RankChoice::Explicit(r) => {
            let ranks = if r.len() == 1 { vec![r[0]; y.order()] } else { r.clone() };
            Ok((RankRule::Explicit(ranks).resolve(y.dims())?, None))
        }
        RankChoice::LogC(c) => Ok((RankRule::log(*c, exponent)?.resolve(y.dims())?, Some(*c))),
        RankChoice::Cv { c_grid, folds } => {
            let out = select_rank_cv(y, c_grid, exponent, *folds, seed)?;
            Ok((out.ranks, Some(out.best_c)))
        }
        RankChoice::Sweep(_) => Err(Error::arg("a rank sweep has no single rank")),
    }
}

struct Cell {
    s: usize,
    d: usize,
    gamma: f64,
    replicate: usize,
}

fn run_cell(spec: &ExperimentSpec, cell: &Cell) -> Result<Vec<RawRow>> {
    let dims = spec.cell_dims(cell.d);
    let model = spec.model;
    let rep = cell.replicate as u64;
    let theta = cell_signal(model, cell.s, &dims, stream_seed(spec.seed, "signal", model, cell.s, &dims, &[rep]))?;
    let sigma = match spec.kind {
        ExperimentKind::DenoiseRankSweep => noise_sigma_for_level(&theta, cell.gamma)?,
        _ => cell.gamma,
    };
    let noise_seed = stream_seed(spec.seed, "noise", model, cell.s, &dims, &[cell.gamma.to_bits(), rep]);
    let y = add_noise(&theta, &NoiseSpec::gaussian(sigma, noise_seed)?)?;
    let fit_seed = stream_seed(spec.seed, "fit", model, cell.s, &dims, &[cell.gamma.to_bits(), rep]);
    let row = |rank: Option<usize>, estimator: &'static str, metric: &'static str, value: f64| RawRow {
        model,
        s: cell.s,
        d: cell.d,
        gamma: Some(cell.gamma),
        rank,
        estimator,
        replicate: cell.replicate,
        metric,
        value,
    };
    let mut rows = Vec::new();
    match spec.kind {
        ExperimentKind::MseVsD | ExperimentKind::EstimatorCompare => {
            let (ranks, c) = resolve_ranks(&y, &spec.rank, cell.s, fit_seed)?;
            rows.push(row(None, "dse", "mse", mse(&dse(&y, &ranks)?.estimate, &theta)?));
            rows.push(row(None, "dse", "rank", ranks[0] as f64));
            if let Some(c) = c {
                rows.push(row(None, "dse", "c", c));
            }
            if spec.kind == ExperimentKind::EstimatorCompare {
                rows.push(row(None, "hosvd", "mse", mse(&hosvd(&y, &ranks)?.estimate, &theta)?));
                let lse = approx_lse(&y, &RankRule::Explicit(ranks), spec.lse_restarts, fit_seed, spec.hooi)?;
                rows.push(row(None, "lse", "mse", mse(&lse.estimate, &theta)?));
            }
        }
        ExperimentKind::DenoiseRankSweep => {
            let RankChoice::Sweep(sweep) = &spec.rank else {
                unreachable!("validated")
            };
            rows.push(row(None, "input", "mse", mse(&y, &theta)?));
            let spectra = ModeSpectra::compute(&y)?;
            for &r in sweep {
                let ranks: Vec<usize> = dims.iter().map(|&d| r.min(d)).collect();
                let est = dse_with(&y, &spectra, &ranks)?.estimate;
                rows.push(row(Some(r), "dse", "mse", mse(&est, &theta)?));
            }
        }
        ExperimentKind::LogrankScan => unreachable!("handled separately"),
    }
    Ok(rows)
}

fn failed_rows(spec: &ExperimentSpec, cell: &Cell) -> Vec<RawRow> {
    let base = RawRow {
        model: spec.model,
        s: cell.s,
        d: cell.d,
        gamma: Some(cell.gamma),
        rank: None,
        estimator: "dse",
        replicate: cell.replicate,
        metric: "mse",
        value: f64::NAN,
    };
    match spec.kind {
        ExperimentKind::EstimatorCompare => ["dse", "hosvd", "lse"]
            .into_iter()
            .map(|estimator| RawRow { estimator, ..base.clone() })
            .collect(),
        _ => vec![base],
    }
}

fn run_scan(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = RankScanConfig {
        epsilon: spec.epsilon,
        r_max: spec.r_max.min(*spec.d_grid.iter().min().expect("validated")),
        d_grid: spec.d_grid.clone(),
        s_grid: spec.s_grid.clone(),
        models: vec![spec.model],
        seeds: (0..spec.replicates as u64).map(|r| derive_seed(spec.seed, &[r])).collect(),
        hooi: spec.hooi,
    };
    let rows = logrank_scan(&cfg)?;
    let mut raw = Vec::new();
    for r in &rows {
        let replicate = cfg.seeds.iter().position(|&s| s == r.seed).expect("scan seed");
        let base = RawRow {
            model: r.model,
            s: r.s,
            d: r.d,
            gamma: None,
            rank: None,
            estimator: "hooi",
            replicate,
            metric: "eps_rank",
            value: r.rank.map_or(f64::NAN, |v| v as f64),
        };
        raw.push(RawRow {
            metric: "rel_err",
            value: r.rel_err,
            ..base.clone()
        });
        raw.push(base);
    }
    raw.sort_by(|a, b| cell_cmp(a, b).then(a.replicate.cmp(&b.replicate)));
    Ok(ExperimentResult {
        kind: spec.kind,
        summary: summarize(&raw),
        raw,
        timings: vec![CellTiming {
            cell: "scan".into(),
            seconds: start.elapsed().as_secs_f64(),
        }],
    })
}

/// Runs every cell of the campaign on the rayon pool. Failing cells are logged
/// and recorded as NaN values.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.kind == ExperimentKind::LogrankScan {
        return run_scan(spec);
    }
    let mut cells = Vec::new();
    for &s in &spec.s_grid {
        for &d in &spec.d_grid {
            for &gamma in &spec.gamma_grid {
                for replicate in 0..spec.replicates {
                    cells.push(Cell { s, d, gamma, replicate });
                }
            }
        }
    }
    let outcomes: Vec<(Vec<RawRow>, CellTiming)> = cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let label = format!(
                "{}/s={}/d={}/gamma={}/rep={}",
                spec.model, cell.s, cell.d, cell.gamma, cell.replicate
            );
            let rows = run_cell(spec, cell).unwrap_or_else(|e| {
                log::warn!("cell {label} failed: {e}");
                failed_rows(spec, cell)
            });
            let seconds = start.elapsed().as_secs_f64();
            (rows, CellTiming { cell: label, seconds })
        })
        .collect();
    let mut raw = Vec::new();
    let mut timings = Vec::new();
    for (rows, t) in outcomes {
        raw.extend(rows);
        timings.push(t);
    }
    raw.sort_by(|a, b| cell_cmp(a, b).then(a.replicate.cmp(&b.replicate)));
    Ok(ExperimentResult {
        kind: spec.kind,
        summary: summarize(&raw),
        raw,
        timings,
    })
}

fn gamma_field(g: Option<f64>) -> Field {
    g.map_or(Field::Missing, Field::Float)
}

impl ExperimentResult {
    pub fn raw_fields(&self) -> Vec<Vec<Field>> {
        self.raw
            .iter()
            .map(|r| {
                vec![
                    self.kind.name().into(),
                    r.model.name().into(),
                    r.s.into(),
                    r.d.into(),
                    gamma_field(r.gamma),
                    r.rank.into(),
                    r.estimator.into(),
                    r.replicate.into(),
                    r.metric.into(),
                    r.value.into(),
                ]
            })
            .collect()
    }

    pub fn summary_fields(&self) -> Vec<Vec<Field>> {
        self.summary
            .iter()
            .map(|r| {
                vec![
                    self.kind.name().into(),
                    r.model.name().into(),
                    r.s.into(),
                    r.d.into(),
                    gamma_field(r.gamma),
                    r.rank.into(),
                    r.estimator.into(),
                    r.metric.into(),
                    r.n.into(),
                    r.mean.into(),
                    r.se.into(),
                ]
            })
            .collect()
    }

    /// Writes the raw table to `out`, the summary next to it as
    /// `<stem>.summary.csv` and cell timings as `<stem>.timings.txt`. Returns the
    /// three paths.
    pub fn write(&self, out: &Path) -> Result<[PathBuf; 3]> {
        let summary = sibling(out, "summary.csv");
        let timings = sibling(out, "timings.txt");
        write_csv(out, &RAW_HEADER, &self.raw_fields())?;
        write_csv(&summary, &SUMMARY_HEADER, &self.summary_fields())?;
        let mut text = String::from("cell\tseconds\n");
        for t in &self.timings {
            text.push_str(&format!("{}\t{:.3}\n", t.cell, t.seconds));
        }
        fs::write(&timings, text).map_err(|e| Error::io(&timings, e))?;
        Ok([out.to_path_buf(), summary, timings])
    }
}

/// `results.csv` + `summary.csv` → `results.summary.csv`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    let mut name = stem.into_os_string();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Rank selection for denoising a single tensor.
#[derive(Clone, Debug, PartialEq)]
pub enum DenoiseRank {
    Rule(RankRule),
    Cv {
        c_grid: Vec<f64>,
        exponent: u32,
        folds: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseReport {
    pub input: PathBuf,
    pub output: PathBuf,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Constant chosen by cross-validation, if any.
    pub c: Option<f64>,
    /// `‖Y − Θ̂‖_F`.
    pub residual_norm: f64,
    /// `‖Y − Θ̂‖_F / ‖Y‖_F`.
    pub relative_residual: f64,
    pub seconds: f64,
}

impl DenoiseReport {
    pub fn render(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x");
        let mut s = format!(
            "input\t{}\noutput\t{}\ndims\t{}\nranks\t{}\n",
            self.input.display(),
            self.output.display(),
            list(&self.dims),
            list(&self.ranks)
        );
        if let Some(c) = self.c {
            s.push_str(&format!("cv_c\t{c}\n"));
        }
        s.push_str(&format!(
            "residual_norm\t{:.10e}\nrelative_residual\t{:.10e}\nruntime_seconds\t{:.3}\n",
            self.residual_norm, self.relative_residual, self.seconds
        ));
        s
    }
}

/// DSE estimate of `y` with the ranks picked by `rank`; returns the estimate,
/// the ranks and the cross-validated constant.
pub fn denoise_tensor(y: &DenseTensor, rank: &DenoiseRank) -> Result<(DenseTensor, Vec<usize>, Option<f64>)> {
    let (ranks, c) = match rank {
        DenoiseRank::Rule(RankRule::Explicit(r)) => {
            // explicit ranks are not clamped here: a rank above an extent is a user error
            if r.len() != y.order() || r.iter().zip(y.dims()).any(|(&r, &d)| r == 0 || r > d) {
                return Err(Error::arg(format!(
                    "ranks {r:?} are infeasible for a tensor of shape {:?}",
                    y.dims()
                )));
            }
            (r.clone(), None)
        }
        DenoiseRank::Rule(rule) => (rule.resolve(y.dims())?, None),
        DenoiseRank::Cv {
            c_grid,
            exponent,
            folds,
            seed,
        } => {
            let out = select_rank_cv(y, c_grid, *exponent, *folds, *seed)?;
            (out.ranks, Some(out.best_c))
        }
    };
    Ok((dse(y, &ranks)?.estimate, ranks, c))
}

/// Reads a DTF1 tensor, denoises it with DSE and writes the estimate to
/// `output` and a report to `<output>.report.txt`.
pub fn denoise_file(input: &Path, rank: &DenoiseRank, output: &Path) -> Result<DenoiseReport> {
    let start = Instant::now();
    let y = read_dtf1(input)?;
    let (est, ranks, c) = denoise_tensor(&y, rank)?;
    write_dtf1(output, &est)?;
    let residual_norm = y.sub(&est)?.frobenius_norm();
    let norm = y.frobenius_norm();
    let report = DenoiseReport {
        input: input.to_path_buf(),
        output: output.to_path_buf(),
        dims: y.dims().to_vec(),
        ranks,
        c,
        residual_norm,
        relative_residual: if norm > 0.0 { residual_norm / norm } else { 0.0 },
        seconds: start.elapsed().as_secs_f64(),
    };
    let report_path = report_path(output);
    fs::write(&report_path, report.render()).map_err(|e| Error::io(&report_path, e))?;
    Ok(report)
}

pub fn report_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".report.txt");
    PathBuf::from(name)
}
