//! Singular value decomposition primitives.
//!
//! Top-r left singular vectors come from the symmetric eigendecomposition of
//! the Gram matrix `A·A^T` whenever `rows ≤ GRAM_LIMIT`. Unfoldings are short
//! and fat (`d × d^{m-1}`), so this never materializes right factors. Larger
//! row counts fall back to a bidiagonal SVD. Both routes return sign-canonical
//! columns: the largest-magnitude entry of each column is positive.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Largest row count handled by the Gram route.
pub const GRAM_LIMIT: usize = 512;

const EIG_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 10_000;

/// `A = left · diag(singular_values) · right^T`, thin form.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        self.left
            .scale_columns(&self.singular_values)
            .matmul(&self.right.transpose())
            .expect("factor shapes agree")
    }

    /// Best rank-`r` approximation (Eckart–Young).
    pub fn truncated(&self, r: usize) -> Matrix {
        let r = r.min(self.singular_values.len());
        self.left
            .leading_columns(r)
            .scale_columns(&self.singular_values[..r])
            .matmul(&self.right.leading_columns(r).transpose())
            .expect("factor shapes agree")
    }
}

/// Left singular vectors (all of them, up to `min(rows, cols)` or `rows`) with
/// their singular values, sorted non-increasing.
#[derive(Clone, Debug)]
pub struct LeftSpectrum {
    vectors: Matrix,
    singular_values: Vec<f64>,
}

impl LeftSpectrum {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank_capacity(&self) -> usize {
        self.vectors.cols()
    }

    /// Leading `r` singular vectors as a `rows × r` matrix.
    pub fn top(&self, r: usize) -> Result<Matrix> {
        if r == 0 || r > self.vectors.cols() {
            return Err(Error::arg(format!(
                "rank {r} outside [1, {}]",
                self.vectors.cols()
            )));
        }
        Ok(self.vectors.leading_columns(r))
    }
}

fn check_finite(a: &Matrix) -> Result<()> {
    if let Some(pos) = a.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::arg(format!(
            "non-finite entry at ({}, {})",
            pos / a.cols(),
            pos % a.cols()
        )));
    }
    Ok(())
}

fn to_dmatrix(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.values())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn diagnostics(a: &Matrix) -> String {
    let max = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    format!(
        "{}x{} matrix, frobenius norm {:.3e}, max |entry| {:.3e}",
        a.rows(),
        a.cols(),
        a.frobenius_norm(),
        max
    )
}

/// Flips column signs so the largest-magnitude entry of each column is positive.
/// Returns the applied signs.
pub fn canonicalize_signs(m: &mut Matrix) -> Vec<f64> {
    let mut signs = vec![1.0; m.cols()];
    for (j, sign) in signs.iter_mut().enumerate() {
        let mut best = 0.0f64;
        let mut best_val = 0.0;
        for i in 0..m.rows() {
            let v = m.get(i, j);
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < 0.0 {
            *sign = -1.0;
            for i in 0..m.rows() {
                let v = m.get(i, j);
                m.set(i, j, -v);
            }
        }
    }
    signs
}

/// Full thin SVD with non-increasing singular values.
pub fn svd_full(a: &Matrix) -> Result<SvdResult> {
    check_finite(a)?;
    let svd = to_dmatrix(a)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical(format!("SVD did not converge: {}", diagnostics(a))))?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let p = svd.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut left = Matrix::from_fn(a.rows(), p, |i, j| u[(i, order[j])]);
    let mut right = Matrix::from_fn(a.cols(), p, |i, j| vt[(order[j], i)]);
    let singular_values = order.iter().map(|&j| svd.singular_values[j]).collect();
    let signs = canonicalize_signs(&mut left);
    for (j, s) in signs.iter().enumerate() {
        if *s < 0.0 {
            for i in 0..right.rows() {
                let v = right.get(i, j);
                right.set(i, j, -v);
            }
        }
    }
    Ok(SvdResult {
        left,
        singular_values,
        right,
    })
}

/// Eigendecomposition of a symmetric positive semi-definite Gram matrix,
/// returned as a left spectrum (`σ_i = sqrt(max(λ_i, 0))`).
pub fn left_spectrum_from_gram(gram: &Matrix) -> Result<LeftSpectrum> {
    if gram.rows() != gram.cols() {
        return Err(Error::arg("Gram matrix must be square"));
    }
    check_finite(gram)?;
    let n = gram.rows();
    let eig = SymmetricEigen::try_new(to_dmatrix(gram), EIG_EPS, MAX_SWEEPS).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge: {}",
            diagnostics(gram)
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let mut vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    canonicalize_signs(&mut vectors);
    let singular_values = order
        .iter()
        .map(|&j| eig.eigenvalues[j].max(0.0).sqrt())
        .collect();
    Ok(LeftSpectrum {
        vectors,
        singular_values,
    })
}

/// Left spectrum of `a`, via the Gram route or a bidiagonal SVD for tall inputs.
pub fn left_spectrum(a: &Matrix) -> Result<LeftSpectrum> {
    check_finite(a)?;
    if a.rows() <= GRAM_LIMIT {
        left_spectrum_from_gram(&a.gram())
    } else {
        let svd = svd_full(a)?;
        Ok(LeftSpectrum {
            vectors: svd.left,
            singular_values: svd.singular_values,
        })
    }
}

/// Top-`r` left singular vectors, `rows × r` with orthonormal columns.
pub fn svd_top_left(a: &Matrix, r: usize) -> Result<Matrix> {
    let limit = a.rows().min(a.cols());
    if r == 0 || r > limit {
        return Err(Error::arg(format!(
            "rank {r} outside [1, {limit}] for a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    left_spectrum(a)?.top(r)
}

/// Random `rows × cols` matrix with orthonormal columns (QR of a Gaussian draw).
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if cols == 0 || cols > rows {
        return Err(Error::arg(format!(
            "cannot draw {cols} orthonormal columns in dimension {rows}"
        )));
    }
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    Ok(from_dmatrix(&q))
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases of equal width.
pub fn subspace_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::arg("subspace bases must share a shape"));
    }
    let cross = u.t_matmul(v)?;
    let s = svd_full(&cross)?;
    let min_cos = s
        .singular_values
        .iter()
        .fold(1.0f64, |m, &c| m.min(c.min(1.0)));
    Ok((1.0 - min_cos * min_cos).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_and_diagonal_singular_values() {
        let s = svd_full(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singular_values.len(), 3);
        for v in &s.singular_values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let d = Matrix::from_diag(&[1.0, 3.0, 2.0]);
        let s = svd_full(&d).unwrap();
        for (got, want) in s.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn random_reconstruction() {
        let a = random_matrix(5, 4, 11);
        let s = svd_full(&a).unwrap();
        let err = s.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(err < 1e-10 * a.frobenius_norm(), "{err}");
        assert!(s.left.orthonormality_defect() < 1e-10);
        assert!(s.right.orthonormality_defect() < 1e-10);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_one_top_vector_is_sign_canonical() {
        let u = [0.6, -0.8, 0.0];
        let v = [1.0, 2.0, -2.0, 0.5];
        let a = Matrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let top = svd_top_left(&a, 1).unwrap();
        // largest-magnitude entry (-0.8) flipped positive
        let want = [-0.6, 0.8, 0.0];
        for (i, w) in want.iter().enumerate() {
            assert!((top.get(i, 0) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_top_two_are_basis_vectors() {
        let top = svd_top_left(&Matrix::from_diag(&[3.0, 2.0, 1.0]), 2).unwrap();
        let want = Matrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(top.sub(&want).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn eckart_young_tail_matches_full_svd() {
        let a = random_matrix(6, 5, 3);
        let u = svd_top_left(&a, 2).unwrap();
        let proj = u.matmul(&u.t_matmul(&a).unwrap()).unwrap();
        let resid = a.sub(&proj).unwrap().frobenius_norm();
        let s = svd_full(&a).unwrap();
        let tail: f64 = s.singular_values[2..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((resid - tail).abs() < 1e-9, "{resid} vs {tail}");
    }

    #[test]
    fn projection_beats_random_rank_r_competitors() {
        let a = random_matrix(7, 6, 5);
        let mut rng = rng_from_seed(99);
        for r in 1..=5 {
            let u = svd_top_left(&a, r).unwrap();
            let best = a
                .sub(&u.matmul(&u.t_matmul(&a).unwrap()).unwrap())
                .unwrap()
                .frobenius_norm();
            for _ in 0..100 {
                let l = Matrix::from_fn(7, r, |_, _| rng.sample::<f64, _>(StandardNormal));
                let rt = Matrix::from_fn(r, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b = l.matmul(&rt).unwrap();
                assert!(best <= a.sub(&b).unwrap().frobenius_norm() + 1e-12);
            }
        }
    }

    #[test]
    fn rotation_equivariance_of_top_subspace() {
        let a = random_matrix(6, 9, 21);
        let mut rng = rng_from_seed(22);
        let q = random_orthonormal(6, 6, &mut rng).unwrap();
        for r in 1..=4 {
            let u = svd_top_left(&a, r).unwrap();
            let uq = svd_top_left(&q.matmul(&a).unwrap(), r).unwrap();
            let rotated = q.matmul(&u).unwrap();
            assert!(subspace_distance(&uq, &rotated).unwrap() < 1e-8);
        }
    }

    #[test]
    fn tall_matrices_use_bidiagonal_route() {
        let a = random_matrix(GRAM_LIMIT + 3, 4, 8);
        let u = svd_top_left(&a, 3).unwrap();
        assert_eq!(u.shape(), (GRAM_LIMIT + 3, 3));
        assert!(u.orthonormality_defect() < 1e-10);
        let s = svd_full(&a).unwrap();
        let d = subspace_distance(&u, &s.left.leading_columns(3)).unwrap();
        assert!(d < 1e-8);
    }

    #[test]
    fn errors() {
        let a = random_matrix(3, 2, 1);
        assert!(matches!(svd_top_left(&a, 3), Err(Error::Argument(_))));
        assert!(matches!(svd_top_left(&a, 0), Err(Error::Argument(_))));
        let mut bad = a.clone();
        bad.set(0, 0, f64::NAN);
        assert!(matches!(svd_full(&bad), Err(Error::Argument(_))));
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let mut rng = rng_from_seed(4);
        let q = random_orthonormal(10, 4, &mut rng).unwrap();
        assert!(q.orthonormality_defect() < 1e-12);
    }
}
