//! Seeded random and synthetic test matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{householder_qr, matmul_op, DenseMatrix, Op};

/// m-by-n matrix of independent standard normal entries.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    DenseMatrix::from_col_major(m, n, data).expect("length matches")
}

/// Orthogonal factor of the QR of a seeded Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    householder_qr(&gaussian_matrix(n, n, seed))
        .expect("square input")
        .0
}

/// `n` values log-spaced from 1 down to `1/kappa`.
pub fn log_spectrum(n: usize, kappa: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let span = kappa.log10();
    (0..n)
        .map(|i| 10f64.powf(-span * i as f64 / (n - 1) as f64))
        .collect()
}

/// `Q1 diag(sigma) Q2^T` with log-spaced `sigma` in `[1/kappa, 1]` and
/// orthogonal factors drawn from `seed`.
pub fn gen_synthetic(n: usize, kappa: f64, seed: u64) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(Error::domain(format!("synthetic matrices need n >= 2, got {n}")));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be finite and >= 1, got {kappa}")));
    }
    let sigma = log_spectrum(n, kappa);
    let q1 = random_orthogonal(n, seed.wrapping_mul(2));
    let q2 = random_orthogonal(n, seed.wrapping_mul(2).wrapping_add(1));
    let mut q1s = q1;
    for (j, &s) in sigma.iter().enumerate() {
        q1s.col_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    matmul_op(&q1s, Op::NoTrans, &q2, Op::Trans)
}

/// `diag(sigma)` with the same log-spaced spectrum as [`gen_synthetic`].
pub fn gen_diagonal(n: usize, kappa: f64) -> Result<DenseMatrix> {
    if !(kappa >= 1.0) || !kappa.is_finite() || n == 0 {
        return Err(Error::domain(format!("invalid diagonal test matrix n={n}, kappa={kappa}")));
    }
    Ok(DenseMatrix::from_diag(&log_spectrum(n, kappa)))
}
