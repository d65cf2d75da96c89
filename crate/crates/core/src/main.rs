use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lvtensor::clustering::{cluster_mode, elbow_curve, ClusterParams};
use lvtensor::estimators::cv::select_rank_cv;
use lvtensor::estimators::RankRule;
use lvtensor::experiments::{
    cell_signal, denoise_file, report_path, run_experiment, sibling, DenoiseRank, ExperimentKind, ExperimentSpec,
    Profile, RankChoice, DEFAULT_C_GRID, DEFAULT_FOLDS,
};
use lvtensor::generators::{add_noise, noise_sigma_for_level, ModelId, NoiseSpec};
use lvtensor::io::{read_dtf1, write_csv, write_dtf1, Config, Field};
use lvtensor::rank_analysis::{logrank_scan, RankScanConfig, SCAN_HEADER};
use lvtensor::rng::derive_seed;
use lvtensor::{Error, Result};

#[derive(Parser)]
#[command(name = "lvtensor", version, about = "Latent-variable tensor estimation toolkit")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a signal (plus optional noise) and write it as DTF1.
    Generate(GenerateArgs),
    /// Denoise a DTF1 tensor with the double-projection estimator.
    Denoise(DenoiseArgs),
    /// Numerical ε-rank versus extent, as CSV.
    RankScan(ScanArgs),
    /// Monte-Carlo campaign (mse-vs-d, estimator-compare, denoise-rank-sweep, logrank-scan).
    Bench(BenchArgs),
    /// Tucker-PCA k-means along one mode of a DTF1 tensor.
    Cluster(ClusterArgs),
    /// Cross-validate the log-rank constant for a DTF1 tensor.
    CvRank(CvArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "model1")]
    model: ModelId,
    /// Cubic extent d (d × d × d).
    #[arg(long, required_unless_present = "shape")]
    d: Option<usize>,
    /// Explicit extents, e.g. 60,60,24.
    #[arg(long, value_delimiter = ',', conflicts_with = "d")]
    shape: Option<Vec<usize>>,
    /// Latent dimension (CP/Tucker rank, block or blob count for other models).
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Relative noise level γ.
    #[arg(long, default_value_t = 0.0, conflicts_with = "sigma")]
    gamma: f64,
    /// Absolute noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the noise-free signal here.
    #[arg(long)]
    clean_out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Tucker ranks, one value for all modes or one per mode.
    #[arg(long, value_delimiter = ',', conflicts_with = "rank_c")]
    rank: Option<Vec<usize>>,
    /// Log-rule constant(s); several values are cross-validated.
    #[arg(long, value_delimiter = ',')]
    rank_c: Option<Vec<f64>>,
    /// Exponent of the log rule (latent dimension).
    #[arg(long, default_value_t = 1)]
    s: u32,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
}

impl RankArgs {
    fn denoise_rank(&self, order: usize, seed: u64) -> Result<DenoiseRank> {
        match (&self.rank, &self.rank_c) {
            (Some(r), _) => Ok(DenoiseRank::Rule(RankRule::Explicit(expand(r, order)))),
            (None, Some(c)) if c.len() == 1 => Ok(DenoiseRank::Rule(RankRule::log(c[0], self.s)?)),
            (None, c) => Ok(DenoiseRank::Cv {
                c_grid: c.clone().unwrap_or_else(|| DEFAULT_C_GRID.to_vec()),
                exponent: self.s,
                folds: self.folds,
                seed,
            }),
        }
    }
}

fn expand(r: &[usize], order: usize) -> Vec<usize> {
    if r.len() == 1 {
        vec![r[0]; order]
    } else {
        r.to_vec()
    }
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    rank: RankArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, value_delimiter = ',', default_value = "model1")]
    model: Vec<ModelId>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Largest rank scanned; defaults to the smallest extent.
    #[arg(long)]
    r_max: Option<usize>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 3)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ci")]
    profile: Profile,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, required_unless_present = "config")]
    kind: Option<ExperimentKind>,
    /// Flat `key = value` campaign file; command-line flags are ignored except --out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelId>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Fixed ranks, or the swept ranks for denoise-rank-sweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "rank_c")]
    rank: Option<Vec<usize>>,
    /// Log-rule constant(s); several values are cross-validated per cell.
    #[arg(long, value_delimiter = ',')]
    rank_c: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ci")]
    profile: Profile,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Mode to cluster (1-based).
    #[arg(long, default_value_t = 1)]
    mode: usize,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    rank: RankArgs,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Skip the HOOI refinement of the DSE subspaces.
    #[arg(long)]
    no_refine: bool,
    /// Also write an elbow curve for k = 1..=K to `<out stem>.elbow.csv`.
    #[arg(long)]
    elbow: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    rank_c: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    s: u32,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn generate(a: GenerateArgs) -> Result<()> {
    let dims = match (a.shape, a.d) {
        (Some(s), _) => s,
        (None, Some(d)) => vec![d; 3],
        (None, None) => return Err(Error::Argument("give --d or --shape".into())),
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Argument("extents must be positive".into()));
    }
    let theta = cell_signal(a.model, a.s, &dims, derive_seed(a.seed, &[0]))?;
    let sigma = match a.sigma {
        Some(s) => s,
        None => noise_sigma_for_level(&theta, a.gamma)?,
    };
    let y = add_noise(&theta, &NoiseSpec::gaussian(sigma, derive_seed(a.seed, &[1]))?)?;
    write_dtf1(&a.out, &y)?;
    if let Some(p) = a.clean_out {
        write_dtf1(p, &theta)?;
    }
    log::info!("wrote {} ({:?}, sigma {sigma})", a.out.display(), dims);
    Ok(())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let order = read_dtf1(&a.input)?.order();
    let rank = a.rank.denoise_rank(order, a.seed)?;
    let report = denoise_file(&a.input, &rank, &a.out)?;
    log::info!("report at {}", report_path(&a.out).display());
    print!("{}", report.render());
    Ok(())
}

fn rank_scan(a: ScanArgs) -> Result<()> {
    let preset = ExperimentSpec::preset(ExperimentKind::LogrankScan, a.profile);
    let d_grid = a.d.unwrap_or(preset.d_grid);
    let r_max = a.r_max.unwrap_or_else(|| d_grid.iter().copied().min().unwrap_or(1));
    let cfg = RankScanConfig {
        epsilon: a.epsilon,
        r_max,
        d_grid,
        s_grid: a.s.unwrap_or(preset.s_grid),
        models: a.model,
        seeds: (0..a.replicates as u64).map(|r| derive_seed(a.seed, &[r])).collect(),
        hooi: preset.hooi,
    };
    let rows: Vec<Vec<Field>> = logrank_scan(&cfg)?
        .into_iter()
        .map(|r| {
            vec![
                r.model.name().into(),
                r.s.into(),
                r.d.into(),
                r.seed.into(),
                r.epsilon.into(),
                r.rank.into(),
                r.rel_err.into(),
            ]
        })
        .collect();
    write_csv(&a.out, &SCAN_HEADER, &rows)
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => ExperimentSpec::from_config(&Config::load(p)?)?,
        None => {
            let kind = a.kind.expect("required by clap");
            let mut spec = ExperimentSpec::preset(kind, a.profile);
            spec.seed = a.seed;
            if let Some(m) = a.model {
                spec.model = m;
            }
            if let Some(d) = a.d {
                spec.d_grid = d;
                spec.shape = None;
            }
            if let Some(shape) = a.shape {
                spec.d_grid = vec![shape.first().copied().unwrap_or(0)];
                spec.shape = Some(shape);
            }
            if let Some(s) = a.s {
                spec.s_grid = s;
            }
            if let Some(g) = a.gamma {
                spec.gamma_grid = g;
            }
            if let Some(r) = a.replicates {
                spec.replicates = r;
            }
            if let Some(r) = a.rank {
                spec.rank = if kind == ExperimentKind::DenoiseRankSweep {
                    RankChoice::Sweep(r)
                } else {
                    RankChoice::Explicit(r)
                };
            }
            if let Some(c) = a.rank_c {
                spec.rank = match c.as_slice() {
                    [one] => RankChoice::LogC(*one),
                    _ => RankChoice::Cv {
                        c_grid: c,
                        folds: DEFAULT_FOLDS,
                    },
                };
            }
            if kind == ExperimentKind::LogrankScan {
                spec.r_max = spec.d_grid.iter().copied().min().unwrap_or(1);
            }
            spec
        }
    };
    if a.out.is_some() {
        spec.output = a.out;
    }
    let out = spec
        .output
        .clone()
        .ok_or_else(|| Error::Argument("give --out or an `out` config key".into()))?;
    let result = run_experiment(&spec)?;
    for p in result.write(&out)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let y = read_dtf1(&a.input)?;
    if a.mode == 0 || a.mode > y.order() {
        return Err(Error::Argument(format!(
            "mode {} out of range 1..={}",
            a.mode,
            y.order()
        )));
    }
    let rule = match (&a.rank.rank, &a.rank.rank_c) {
        (Some(r), _) => RankRule::Explicit(expand(r, y.order())),
        (None, Some(c)) if c.len() == 1 => RankRule::log(c[0], a.rank.s)?,
        (None, c) => {
            let grid = c.clone().unwrap_or_else(|| DEFAULT_C_GRID.to_vec());
            RankRule::Explicit(select_rank_cv(&y, &grid, a.rank.s, a.rank.folds, a.seed)?.ranks)
        }
    };
    let params = ClusterParams {
        restarts: a.restarts,
        seed: a.seed,
        refine: !a.no_refine,
        ..ClusterParams::default()
    };
    let out = cluster_mode(&y, &rule, a.mode - 1, a.k, params)?;
    let rows: Vec<Vec<Field>> = out
        .assignment
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| vec![i.into(), l.into()])
        .collect();
    write_csv(&a.out, &["row_index", "label"], &rows)?;
    log::info!(
        "pipeline {} ranks {:?} wcss {}",
        out.pipeline,
        out.ranks,
        out.assignment.wcss
    );
    if let Some(kmax) = a.elbow {
        let kmax = kmax.min(out.components.rows());
        let grid: Vec<usize> = (1..=kmax).collect();
        let curve = elbow_curve(&out.components, &grid, a.restarts, a.seed)?;
        let rows: Vec<Vec<Field>> = curve.into_iter().map(|(k, w)| vec![k.into(), w.into()]).collect();
        write_csv(sibling(&a.out, "elbow.csv"), &["k", "wcss"], &rows)?;
    }
    Ok(())
}

fn cv_rank(a: CvArgs) -> Result<()> {
    let y = read_dtf1(&a.input)?;
    let grid = a.rank_c.unwrap_or_else(|| DEFAULT_C_GRID.to_vec());
    let out = select_rank_cv(&y, &grid, a.s, a.folds, a.seed)?;
    let rows: Vec<Vec<Field>> = out
        .table
        .iter()
        .map(|r| {
            vec![
                r.c.into(),
                r.ranks.as_ref().map(|v| v[0]).into(),
                r.mean_score.into(),
                (if r.c == out.best_c && r.mean_score.is_some() { 1usize } else { 0 }).into(),
                r.note.as_str().into(),
            ]
        })
        .collect();
    write_csv(&a.out, &["c", "rank", "mean_score", "selected", "note"], &rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Denoise(a) => denoise(a),
        Command::RankScan(a) => rank_scan(a),
        Command::Bench(a) => bench(a),
        Command::Cluster(a) => cluster(a),
        Command::CvRank(a) => cv_rank(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
