//! Signal tensors from latent-variable models, plus Gaussian noise.
//!
//! A [`LatentModel`] pairs a latent function with one latent matrix per mode
//! (row `i` of mode `k` is the latent vector of index `i`). The signal is
//! `Θ(i_1..i_m) = link(f(a^(1)_{i_1}, .., a^(m)_{i_m}))`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::random_orthonormal;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{DenseTensor, Matrix};

/// The three smooth functions of pairwise latent distances used in the simulations.
/// Each is applied to `D = (‖x−y‖² + ‖y−z‖² + ‖z−x‖²) / 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceFunction {
    /// `exp(−D)`
    Model1,
    /// `cos(D)`
    Model2,
    /// `log(1 + D)`
    Model3,
}

impl DistanceFunction {
    pub fn apply(self, mean_sq_dist: f64) -> f64 {
        match self {
            DistanceFunction::Model1 => (-mean_sq_dist).exp(),
            DistanceFunction::Model2 => mean_sq_dist.cos(),
            DistanceFunction::Model3 => mean_sq_dist.ln_1p(),
        }
    }

    pub fn evaluate(self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let d = (sq_dist(x, y) + sq_dist(y, z) + sq_dist(z, x)) / 3.0;
        self.apply(d)
    }
}

/// Entrywise link applied after the latent function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

impl Link {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Logistic => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LatentFunction {
    Distance(DistanceFunction),
    /// `f(x_1..x_m) = <λ, x_1 ∘ .. ∘ x_m>`
    Cp { weights: Vec<f64> },
    /// `f(x_1..x_m) = C ×_1 x_1^T .. ×_m x_m^T`
    Tucker { core: DenseTensor },
    /// `λ · Π_k 1{i_k ∈ I_k}`; latents are the indicator vectors.
    Chc { amplitude: f64, index_sets: Vec<Vec<usize>> },
}

/// Model family names accepted on the command line and in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Model1,
    Model2,
    Model3,
    Cp,
    Tucker,
    Chc,
    /// Sum of anisotropic Gaussian blobs; stands in for an image volume.
    Smooth,
}

impl ModelId {
    pub fn name(self) -> &'static str {
        match self {
            ModelId::Model1 => "model1",
            ModelId::Model2 => "model2",
            ModelId::Model3 => "model3",
            ModelId::Cp => "cp",
            ModelId::Tucker => "tucker",
            ModelId::Chc => "chc",
            ModelId::Smooth => "smooth",
        }
    }

    pub fn distance_function(self) -> Option<DistanceFunction> {
        match self {
            ModelId::Model1 => Some(DistanceFunction::Model1),
            ModelId::Model2 => Some(DistanceFunction::Model2),
            ModelId::Model3 => Some(DistanceFunction::Model3),
            _ => None,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "model1" | "1" => ModelId::Model1,
            "model2" | "2" => ModelId::Model2,
            "model3" | "3" => ModelId::Model3,
            "cp" => ModelId::Cp,
            "tucker" => ModelId::Tucker,
            "chc" => ModelId::Chc,
            "smooth" => ModelId::Smooth,
            other => return Err(Error::arg(format!("unknown model id '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentModel {
    function: LatentFunction,
    latents: Vec<Matrix>,
    link: Link,
}

fn check_box(m: &Matrix, lo: f64, hi: f64, what: &str) -> Result<()> {
    if m.values().iter().any(|&v| !(lo..=hi).contains(&v)) {
        return Err(Error::arg(format!(
            "{what} latent entries must lie in [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl LatentModel {
    /// Order-3 distance model with the same latent list on every mode.
    pub fn distance(function: DistanceFunction, latents: Matrix) -> Result<Self> {
        Self::distance_per_mode(function, vec![latents.clone(), latents.clone(), latents])
    }

    pub fn distance_per_mode(function: DistanceFunction, latents: Vec<Matrix>) -> Result<Self> {
        if latents.len() != 3 {
            return Err(Error::arg("distance models are order 3"));
        }
        let s = latents[0].cols();
        if latents.iter().any(|l| l.cols() != s) {
            return Err(Error::arg("distance models need equal latent dimension per mode"));
        }
        Ok(LatentModel {
            function: LatentFunction::Distance(function),
            latents,
            link: Link::Identity,
        })
    }

    pub fn cp(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::arg("CP weights must be positive"));
        }
        if factors.is_empty() {
            return Err(Error::arg("CP model needs at least one mode"));
        }
        for f in &factors {
            if f.cols() != weights.len() {
                return Err(Error::arg("CP factor width must equal the number of weights"));
            }
            check_box(f, -1.0, 1.0, "CP")?;
        }
        Ok(LatentModel {
            function: LatentFunction::Cp { weights },
            latents: factors,
            link: Link::Identity,
        })
    }

    pub fn tucker(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::arg("Tucker model needs one factor per core mode"));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.cols() != core.dims()[k] {
                return Err(Error::arg(format!(
                    "Tucker factor {} has {} columns, core extent is {}",
                    k + 1,
                    f.cols(),
                    core.dims()[k]
                )));
            }
            check_box(f, -1.0, 1.0, "Tucker")?;
        }
        Ok(LatentModel {
            function: LatentFunction::Tucker { core },
            latents: factors,
            link: Link::Identity,
        })
    }

    /// Constant high-order clustering tensor `λ · 1_{I_1} ∘ .. ∘ 1_{I_m}` (0-based index sets).
    pub fn chc(amplitude: f64, dims: &[usize], index_sets: Vec<Vec<usize>>) -> Result<Self> {
        if index_sets.len() != dims.len() {
            return Err(Error::arg("CHC needs one index set per mode"));
        }
        let mut latents = Vec::with_capacity(dims.len());
        for (k, set) in index_sets.iter().enumerate() {
            let mut ind = vec![0.0; dims[k]];
            for &i in set {
                if i >= dims[k] {
                    return Err(Error::arg(format!(
                        "CHC index {} outside mode {} extent {}",
                        i + 1,
                        k + 1,
                        dims[k]
                    )));
                }
                if ind[i] != 0.0 {
                    return Err(Error::arg("CHC index sets must not repeat indices"));
                }
                ind[i] = 1.0;
            }
            latents.push(Matrix::new(dims[k], 1, ind)?);
        }
        Ok(LatentModel {
            function: LatentFunction::Chc {
                amplitude,
                index_sets,
            },
            latents,
            link: Link::Identity,
        })
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    /// Distance model with latents drawn i.i.d. from `Unif[0,1]^s`.
    pub fn sample_distance(function: DistanceFunction, d: usize, s: usize, seed: u64) -> Result<Self> {
        let latents = sample_latents(d, s, LatentDistribution::Unit, seed)?;
        Self::distance(function, latents)
    }

    /// CP model with `Unif[-1,1]` factors and `Unif[0.5, 1.5]` weights.
    pub fn random_cp(dims: &[usize], rank: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(derive_seed(seed, &[0]));
        let weights = (0..rank).map(|_| rng.random_range(0.5..1.5)).collect();
        let factors = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                sample_latents(d, rank, LatentDistribution::Symmetric, derive_seed(seed, &[1, k as u64]))
            })
            .collect::<Result<_>>()?;
        Self::cp(weights, factors)
    }

    /// Tucker model with `Unif[-1,1]` core and factor entries.
    pub fn random_tucker(dims: &[usize], ranks: &[usize], seed: u64) -> Result<Self> {
        if dims.len() != ranks.len() {
            return Err(Error::arg("need one rank per mode"));
        }
        let mut rng = rng_from_seed(derive_seed(seed, &[0]));
        let core = DenseTensor::from_fn(ranks, |_| rng.random_range(-1.0..1.0))?;
        let factors = dims
            .iter()
            .zip(ranks)
            .enumerate()
            .map(|(k, (&d, &r))| {
                sample_latents(d, r, LatentDistribution::Symmetric, derive_seed(seed, &[1, k as u64]))
            })
            .collect::<Result<_>>()?;
        Self::tucker(core, factors)
    }

    pub fn function(&self) -> &LatentFunction {
        &self.function
    }

    pub fn latents(&self) -> &[Matrix] {
        &self.latents
    }

    pub fn latent_dims(&self) -> Vec<usize> {
        self.latents.iter().map(|l| l.cols()).collect()
    }

    pub fn link(&self) -> Link {
        self.link
    }

    /// Bound `M` on the latent function's magnitude over the latent box.
    pub fn regularity(&self) -> f64 {
        match &self.function {
            LatentFunction::Distance(_) => 1.0,
            LatentFunction::Cp { weights } => weights.iter().sum(),
            LatentFunction::Tucker { core } => core.infinity_norm(),
            LatentFunction::Chc { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.latents.iter().map(|l| l.rows()).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pairwise_sq_dists(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.rows(), |i, j| sq_dist(a.row(i), b.row(j)))
}

/// Evaluates the model entrywise on a grid of extents `dims`.
pub fn generate_signal(model: &LatentModel, dims: &[usize]) -> Result<DenseTensor> {
    let have = model.dims();
    if have != dims {
        return Err(Error::arg(format!(
            "model latents cover dims {have:?}, requested {dims:?}"
        )));
    }
    let raw = match &model.function {
        LatentFunction::Distance(f) => {
            let l = &model.latents;
            let p01 = pairwise_sq_dists(&l[0], &l[1]);
            let p12 = pairwise_sq_dists(&l[1], &l[2]);
            let p20 = pairwise_sq_dists(&l[2], &l[0]);
            let (d0, d1, d2) = (dims[0], dims[1], dims[2]);
            let mut data = vec![0.0; d0 * d1 * d2];
            data.par_chunks_mut(d1 * d2).enumerate().for_each(|(i, slab)| {
                for j in 0..d1 {
                    let a = p01.get(i, j);
                    for k in 0..d2 {
                        slab[j * d2 + k] = f.apply((a + p12.get(j, k) + p20.get(k, i)) / 3.0);
                    }
                }
            });
            DenseTensor::new(dims.to_vec(), data)?
        }
        LatentFunction::Cp { weights } => {
            let r = weights.len();
            let core_dims = vec![r; dims.len()];
            let mut core = DenseTensor::zeros(&core_dims)?;
            for (j, &w) in weights.iter().enumerate() {
                core.set(&vec![j; dims.len()], w);
            }
            tucker_expand(&core, &model.latents)?
        }
        LatentFunction::Tucker { core } => tucker_expand(core, &model.latents)?,
        LatentFunction::Chc { amplitude, .. } => {
            let core = DenseTensor::filled(&vec![1; dims.len()], *amplitude)?;
            tucker_expand(&core, &model.latents)?
        }
    };
    Ok(match model.link {
        Link::Identity => raw,
        link => raw.map(|v| link.apply(v)),
    })
}

fn tucker_expand(core: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    let pairs: Vec<(usize, &Matrix)> = factors.iter().enumerate().collect();
    core.multilinear_multiply(&pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentDistribution {
    /// `Unif[0,1]`
    Unit,
    /// `Unif[-1,1]`
    Symmetric,
}

/// `d` latent vectors of length `s`, returned as the rows of a `d × s` matrix.
pub fn sample_latents(d: usize, s: usize, dist: LatentDistribution, seed: u64) -> Result<Matrix> {
    if d == 0 || s == 0 {
        return Err(Error::arg("latent count and dimension must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = match dist {
        LatentDistribution::Unit => (0.0, 1.0),
        LatentDistribution::Symmetric => (-1.0, 1.0),
    };
    Ok(Matrix::from_fn(d, s, |_, _| rng.random_range(lo..=hi)))
}

/// i.i.d. Gaussian noise `σ·Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::arg(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(NoiseSpec { sigma, seed })
    }
}

/// `Y = Θ + σ·Z`, `Z` drawn in storage order from the seeded stream.
pub fn add_noise(theta: &DenseTensor, noise: &NoiseSpec) -> Result<DenseTensor> {
    if !(noise.sigma >= 0.0) {
        return Err(Error::arg("noise sigma must be >= 0"));
    }
    if noise.sigma == 0.0 {
        return Ok(theta.clone());
    }
    let mut rng = rng_from_seed(noise.seed);
    let mut y = theta.clone();
    for v in y.values_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += noise.sigma * z;
    }
    Ok(y)
}

/// `σ_γ = γ · (‖Θ‖_F² / d_*)^{1/2}`.
pub fn noise_sigma_for_level(theta: &DenseTensor, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::arg(format!("noise level must be >= 0, got {gamma}")));
    }
    let ms = theta.frobenius_norm().powi(2) / theta.len() as f64;
    Ok(gamma * ms.sqrt())
}

/// Smooth positive volume standing in for an image: rotated anisotropic
/// Gaussian blobs inside a soft ellipsoidal mask, over a constant floor. The
/// blobs are not axis-aligned, so the volume has full Tucker rank with a
/// decaying spectrum rather than an exact low-rank structure.
pub fn smooth_volume(dims: &[usize], blobs: usize, seed: u64) -> Result<DenseTensor> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::arg("extents must be positive"));
    }
    let m = dims.len();
    let mut rng = rng_from_seed(seed);
    let radii: Vec<f64> = (0..m).map(|_| rng.random_range(0.35..0.45)).collect();
    let mut params = Vec::new();
    for _ in 0..blobs.max(1) {
        let amp = rng.random_range(0.5..1.5);
        let centers: Vec<f64> = (0..m).map(|_| rng.random_range(0.25..0.75)).collect();
        let widths: Vec<f64> = (0..m).map(|_| rng.random_range(0.06..0.2)).collect();
        let rotation = random_orthonormal(m, m, &mut rng)?;
        params.push((amp, centers, widths, rotation));
    }
    DenseTensor::from_fn(dims, |idx| {
        let x: Vec<f64> = idx
            .iter()
            .zip(dims)
            .map(|(&i, &d)| (i as f64 + 0.5) / d as f64)
            .collect();
        let rho = x
            .iter()
            .zip(&radii)
            .map(|(xk, a)| ((xk - 0.5) / a).powi(2))
            .sum::<f64>()
            .sqrt();
        let mask = 1.0 / (1.0 + ((rho - 1.0) / 0.06).exp());
        let mut v = 0.3;
        for (amp, c, w, rot) in &params {
            let mut e = 0.0;
            for j in 0..m {
                let z: f64 = (0..m).map(|k| rot.get(k, j) * (x[k] - c[k])).sum();
                e += (z / w[j]).powi(2);
            }
            v += amp * (-0.5 * e).exp();
        }
        0.1 + mask * v
    })
}

/// Sum of CHC blocks with planted row memberships along mode 0.
#[derive(Clone, Debug)]
pub struct PlantedBlocks {
    pub signal: DenseTensor,
    /// Planted block of each mode-0 index.
    pub labels: Vec<usize>,
}

/// `Θ = Σ_b λ_b · 1_{I_b} ∘ 1_{J_b^(2)} ∘ .. ∘ 1_{J_b^(m)}` where the `I_b`
/// partition mode 0 into near-equal random groups and each `J_b^(k)` is a random
/// half of mode `k`.
pub fn planted_blocks(dims: &[usize], amplitudes: &[f64], seed: u64) -> Result<PlantedBlocks> {
    let blocks = amplitudes.len();
    if blocks == 0 || dims.is_empty() || dims[0] < blocks {
        return Err(Error::arg("need at least one mode-0 index per block"));
    }
    let mut rng = rng_from_seed(seed);
    let mut rows: Vec<usize> = (0..dims[0]).collect();
    rows.shuffle(&mut rng);
    let mut labels = vec![0; dims[0]];
    for (pos, &i) in rows.iter().enumerate() {
        labels[i] = pos % blocks;
    }
    let mut signal = DenseTensor::zeros(dims)?;
    for (b, &amp) in amplitudes.iter().enumerate() {
        let mut sets = vec![(0..dims[0]).filter(|&i| labels[i] == b).collect::<Vec<_>>()];
        for &d in &dims[1..] {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.shuffle(&mut rng);
            idx.truncate(d.div_ceil(2));
            idx.sort_unstable();
            sets.push(idx);
        }
        let block = generate_signal(&LatentModel::chc(amp, dims, sets)?, dims)?;
        signal = signal.add(&block)?;
    }
    Ok(PlantedBlocks { signal, labels })
}
