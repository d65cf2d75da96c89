//! Dense tensors and matrices.
//!
//! Storage is row-major with the last index varying fastest. Unfolding uses the
//! Kolda–Bader column ordering: in `unfold(t, k)` the column index of entry
//! `(i_1, .., i_m)` is `Σ_{n≠k} i_n · Π_{j<n, j≠k} d_j`, so among the remaining
//! modes the lowest one varies fastest. Modes are 0-based throughout the API.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many output entries mode products and Gram matrices stay single-threaded.
const PAR_THRESHOLD: usize = 1 << 15;

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg(format!(
                "matrix extents must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::arg(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix extents must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix extents must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Keeps the first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Matrix {
        assert!(n >= 1 && n <= self.cols);
        Matrix::from_fn(self.rows, n, |i, j| self.get(i, j))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::arg(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for p in 0..self.cols {
                let a = self.data[i * self.cols + p];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::arg(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for p in 0..self.rows {
            let arow = self.row(p);
            let brow = other.row(p);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `A · A^T` (rows × rows).
    pub fn gram(&self) -> Matrix {
        gram_of_rows(&self.data, self.rows, self.cols)
    }

    /// Projector `U · U^T` onto the column span (assumes orthonormal columns).
    pub fn projector(&self) -> Matrix {
        self.gram()
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::arg("matrix shape mismatch in subtraction"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale_columns(&self, scales: &[f64]) -> Matrix {
        assert_eq!(scales.len(), self.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * scales[j])
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Largest entrywise deviation of `self^T self` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.t_matmul(self).expect("shapes agree");
        let mut worst = 0.0f64;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }
}

fn gram_of_rows(data: &[f64], rows: usize, cols: usize) -> Matrix {
    let row = |i: usize| &data[i * cols..(i + 1) * cols];
    let compute_row = |i: usize| -> Vec<f64> { (i..rows).map(|j| dot(row(i), row(j))).collect() };
    let upper: Vec<Vec<f64>> = if rows * rows * cols >= PAR_THRESHOLD * 8 {
        (0..rows).into_par_iter().map(compute_row).collect()
    } else {
        (0..rows).map(compute_row).collect()
    };
    let mut g = Matrix::zeros(rows, rows);
    for (i, vals) in upper.into_iter().enumerate() {
        for (off, v) in vals.into_iter().enumerate() {
            let j = i + off;
            g.data[i * rows + j] = v;
            g.data[j * rows + i] = v;
        }
    }
    g
}

/// Order-m real tensor stored row-major (last index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::arg(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        })
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let mut t = DenseTensor::zeros(dims)?;
        t.data.iter_mut().for_each(|v| *v = value);
        Ok(t)
    }

    /// Builds a tensor by evaluating `f` at every multi-index in storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_dims(dims)?;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, dims);
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        DenseTensor {
            dims: vec![m.rows, m.cols],
            data: m.data.clone(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    /// Row-major offset of a 0-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::arg(format!(
                "mode {} out of range for an order-{} tensor (valid 1..={})",
                mode + 1,
                self.order(),
                self.order()
            )));
        }
        Ok(())
    }

    /// (left, extent, right) block sizes around `mode` in storage order.
    fn mode_blocks(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }

    /// Mode-`mode` unfolding with Kolda–Bader column ordering.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let rows = self.dims[mode];
        let cols = self.len() / rows;
        // column stride of each mode inside the unfolding
        let mut stride = vec![0usize; self.order()];
        let mut acc = 1;
        for (n, s) in stride.iter_mut().enumerate() {
            if n != mode {
                *s = acc;
                acc *= self.dims[n];
            }
        }
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; self.order()];
        for &v in &self.data {
            let col: usize = idx.iter().zip(&stride).map(|(i, s)| i * s).sum();
            out[idx[mode] * cols + col] = v;
            increment(&mut idx, &self.dims);
        }
        Matrix::new(rows, cols, out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(mat: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
        validate_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::arg(format!(
                "mode {} out of range for dims {dims:?}",
                mode + 1
            )));
        }
        let total: usize = dims.iter().product();
        if mat.rows != dims[mode] || mat.rows * mat.cols != total {
            return Err(Error::arg(format!(
                "a {}x{} matrix cannot fold into dims {dims:?} at mode {}",
                mat.rows,
                mat.cols,
                mode + 1
            )));
        }
        let mut stride = vec![0usize; dims.len()];
        let mut acc = 1;
        for (n, s) in stride.iter_mut().enumerate() {
            if n != mode {
                *s = acc;
                acc *= dims[n];
            }
        }
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..total {
            let col: usize = idx.iter().zip(&stride).map(|(i, s)| i * s).sum();
            data.push(mat.get(idx[mode], col));
            increment(&mut idx, dims);
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Mode product `self ×_mode u` where `u` is `p × d_mode`.
    pub fn mode_product(&self, mode: usize, u: &Matrix) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        if u.cols != self.dims[mode] {
            return Err(Error::arg(format!(
                "factor for mode {} has {} columns, tensor extent is {}",
                mode + 1,
                u.cols,
                self.dims[mode]
            )));
        }
        let (left, n, right) = self.mode_blocks(mode);
        let p = u.rows;
        let mut out = vec![0.0; left * p * right];
        let block = |l: usize, chunk: &mut [f64]| {
            let src = &self.data[l * n * right..(l + 1) * n * right];
            if right == 1 {
                for (q, o) in chunk.iter_mut().enumerate() {
                    *o = dot(u.row(q), src);
                }
            } else {
                for q in 0..p {
                    let dst = &mut chunk[q * right..(q + 1) * right];
                    for i in 0..n {
                        let w = u.data[q * n + i];
                        if w == 0.0 {
                            continue;
                        }
                        for (o, &s) in dst.iter_mut().zip(&src[i * right..(i + 1) * right]) {
                            *o += w * s;
                        }
                    }
                }
            }
        };
        if out.len() * n >= PAR_THRESHOLD && left > 1 {
            out.par_chunks_mut(p * right)
                .enumerate()
                .for_each(|(l, chunk)| block(l, chunk));
        } else if right > 1 && out.len() * n >= PAR_THRESHOLD {
            // left == 1: split over output rows instead
            let src = &self.data;
            out.par_chunks_mut(right).enumerate().for_each(|(q, dst)| {
                for i in 0..n {
                    let w = u.data[q * n + i];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &s) in dst.iter_mut().zip(&src[i * right..(i + 1) * right]) {
                        *o += w * s;
                    }
                }
            });
        } else {
            out.chunks_mut(p * right)
                .enumerate()
                .for_each(|(l, chunk)| block(l, chunk));
        }
        let mut dims = self.dims.clone();
        dims[mode] = p;
        Ok(DenseTensor { dims, data: out })
    }

    /// Multiplies by one matrix per listed mode. Order of application does not
    /// change the result; factors that shrink the tensor most go first.
    pub fn multilinear_multiply(&self, factors: &[(usize, &Matrix)]) -> Result<DenseTensor> {
        let mut seen = vec![false; self.order()];
        for &(mode, u) in factors {
            self.check_mode(mode)?;
            if seen[mode] {
                return Err(Error::arg(format!(
                    "mode {} appears more than once",
                    mode + 1
                )));
            }
            seen[mode] = true;
            if u.cols != self.dims[mode] {
                return Err(Error::arg(format!(
                    "factor for mode {} has {} columns, tensor extent is {}",
                    mode + 1,
                    u.cols,
                    self.dims[mode]
                )));
            }
        }
        let mut order: Vec<&(usize, &Matrix)> = factors.iter().collect();
        order.sort_by(|a, b| {
            let ra = a.1.rows as f64 / a.1.cols as f64;
            let rb = b.1.rows as f64 / b.1.cols as f64;
            ra.total_cmp(&rb).then(a.0.cmp(&b.0))
        });
        let mut out = self.clone();
        for &&(mode, u) in &order {
            out = out.mode_product(mode, u)?;
        }
        Ok(out)
    }

    /// Gram matrix of the mode-`mode` unfolding, `Unfold_k · Unfold_k^T`.
    /// Column ordering does not affect it, so no Kolda–Bader reorder is done.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix> {
        let m = self.mode_major(mode)?;
        Ok(m.gram())
    }

    /// Unfolding with an implementation-defined column order (storage order of
    /// the remaining modes). Same row space as [`DenseTensor::unfold`].
    pub(crate) fn mode_major(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let (left, n, right) = self.mode_blocks(mode);
        if left == 1 {
            return Matrix::new(n, right, self.data.clone());
        }
        let cols = left * right;
        let mut out = vec![0.0; self.len()];
        for l in 0..left {
            for i in 0..n {
                let src = &self.data[(l * n + i) * right..(l * n + i + 1) * right];
                out[i * cols + l * right..i * cols + (l + 1) * right].copy_from_slice(src);
            }
        }
        Matrix::new(n, cols, out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn infinity_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::arg(format!(
                "shape mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Permutes the slices along `mode`: output slice `i` is input slice `perm[i]`.
    pub fn permute_mode(&self, mode: usize, perm: &[usize]) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        let (left, n, right) = self.mode_blocks(mode);
        if perm.len() != n {
            return Err(Error::arg("permutation length must equal the mode extent"));
        }
        let mut check = vec![false; n];
        for &p in perm {
            if p >= n || check[p] {
                return Err(Error::arg("not a permutation"));
            }
            check[p] = true;
        }
        let mut out = vec![0.0; self.len()];
        for l in 0..left {
            for (i, &p) in perm.iter().enumerate() {
                let src = &self.data[(l * n + p) * right..(l * n + p + 1) * right];
                out[(l * n + i) * right..(l * n + i + 1) * right].copy_from_slice(src);
            }
        }
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data: out,
        })
    }
}

/// Mean squared error `‖a − b‖_F² / d_*`.
pub fn mse(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::arg(format!(
            "mse needs equal shapes, got {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    let ss: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(ss / a.len() as f64)
}

/// `‖a − b‖_F / ‖b‖_F`; zero reference gives the absolute error.
pub fn relative_error(estimate: &DenseTensor, reference: &DenseTensor) -> Result<f64> {
    let diff = estimate.sub(reference)?.frobenius_norm();
    let base = reference.frobenius_norm();
    Ok(if base > 0.0 { diff / base } else { diff })
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::arg("tensor order must be at least 1"));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::arg(format!(
            "extent of mode {} is zero (dims {dims:?})",
            pos + 1
        )));
    }
    Ok(())
}

/// Advances a row-major multi-index odometer.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in (0..dims.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}
