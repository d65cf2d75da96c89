//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use lvtensor::{DenseTensor, Matrix};

/// Every multi-index of `dims` in row-major order.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..d).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// Column of entry `idx` in the mode-`k` unfolding, with earlier modes varying
/// fastest among the remaining ones.
pub fn unfold_column(idx: &[usize], dims: &[usize], k: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for n in 0..dims.len() {
        if n == k {
            continue;
        }
        col += idx[n] * stride;
        stride *= dims[n];
    }
    col
}

/// `(T ×_k U)[.., j, ..] = Σ_i U[j, i] T[.., i, ..]` by direct summation.
pub fn mode_product_oracle(t: &DenseTensor, k: usize, u: &Matrix) -> DenseTensor {
    let mut dims = t.dims().to_vec();
    dims[k] = u.rows();
    DenseTensor::from_fn(&dims, |idx| {
        let mut src = idx.to_vec();
        (0..t.dims()[k])
            .map(|i| {
                src[k] = i;
                u.get(idx[k], i) * t.get(&src)
            })
            .sum()
    })
    .unwrap()
}

/// One-sided exact binomial p-value `P(Bin(n, 1/2) >= wins)`.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for k in wins..=n {
        let mut c = 1.0f64;
        for j in 0..k {
            c = c * (n - j) as f64 / (j + 1) as f64;
        }
        p += c;
    }
    p / 2f64.powi(n as i32)
}

/// Small deterministic integer-valued tensor so that products are exact.
pub fn integer_tensor(dims: &[usize], salt: usize) -> DenseTensor {
    let mut n = 0usize;
    DenseTensor::from_fn(dims, |_| {
        n += 1;
        ((n * 7 + salt * 3) % 11) as f64 - 5.0
    })
    .unwrap()
}

pub fn integer_matrix(rows: usize, cols: usize, salt: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| ((i * 5 + j * 3 + salt) % 7) as f64 - 3.0)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
