//! Extremal singular value estimation.
//!
//! `alpha` is the Frobenius norm, which bounds the spectral norm from above
//! with no iteration. `beta` comes from inverse power iteration on `R^T R`,
//! where `R` is either `A` itself (square) or the triangular factor of a
//! thin QR (tall), so that the solves never form `A^T A` explicitly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::{frobenius, DenseMatrix};
use super::qr::householder_qr;
use crate::error::{Error, Result};

pub const BETA_ITERS: usize = 50;
pub const BETA_SAFETY: f64 = 0.9;
pub const SINGULAR_FLOOR: f64 = 1e-290;
pub const TWO_NORM_MAX_ITERS: usize = 100;

/// Bounds `alpha >= sigma_max` and `beta <= sigma_min` (with high confidence).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub alpha: f64,
    pub beta: f64,
}

impl Bounds {
    pub fn kappa(&self) -> f64 {
        self.alpha / self.beta
    }
}

pub fn estimate_bounds(a: &DenseMatrix) -> Result<Bounds> {
    if !a.is_finite() {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::shape(format!("estimate_bounds expects m >= n, got {m}x{n}")));
    }
    let alpha = a.frobenius_norm();
    if alpha == 0.0 {
        return Err(Error::Singular(0.0));
    }
    let square = if m == n {
        a.clone()
    } else {
        householder_qr(a)?.1
    };
    let lu = Lu::factor(&square)?;
    let mut v = start_vector(n, 0x5eed);
    let mut rq = 0.0;
    for _ in 0..BETA_ITERS {
        // w = (R^T R)^{-1} v, then the Rayleigh quotient of the inverse.
        let y = lu.solve_transpose(&v);
        let w = lu.solve(&y);
        rq = dot(&v, &w);
        let nw = frobenius(&w);
        if !nw.is_finite() || nw == 0.0 {
            return Err(Error::Singular(0.0));
        }
        v = w.iter().map(|x| x / nw).collect();
    }
    let sigma_min = if rq > 0.0 { (1.0 / rq).sqrt() } else { 0.0 };
    if !(sigma_min >= SINGULAR_FLOOR) {
        return Err(Error::Singular(sigma_min));
    }
    Ok(Bounds {
        alpha,
        beta: BETA_SAFETY * sigma_min,
    })
}

/// Spectral norm by power iteration on `A^T A`.
pub fn two_norm_estimate(a: &DenseMatrix) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n, 0x2a2a);
    let mut est = 0.0;
    for _ in 0..TWO_NORM_MAX_ITERS {
        let av = matvec(a, &v);
        let w = matvec_t(a, &av);
        let nw = frobenius(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w.iter().map(|x| x / nw).collect();
        if (next - est).abs() <= 1e-14 * next {
            return next;
        }
        est = next;
    }
    est
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = frobenius(&v);
    v.into_iter().map(|x| x / nv).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    for (j, &xj) in x.iter().enumerate() {
        for (yi, aij) in y.iter_mut().zip(a.col(j)) {
            *yi += aij * xj;
        }
    }
    y
}

fn matvec_t(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..a.cols()).map(|j| dot(a.col(j), x)).collect()
}

/// LU factorization with partial pivoting, `P A = L U`.
pub(crate) struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub(crate) fn factor(a: &DenseMatrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::shape(format!("LU needs a square matrix, got {:?}", a.shape())));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return Err(Error::Singular(0.0));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let col = lu.col_mut(j);
                    col.swap(p, k);
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let f = lu[(k, j)];
                if f != 0.0 {
                    for i in k + 1..n {
                        let l = lu[(i, k)];
                        lu[(i, j)] -= l * f;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        x
    }

    /// Solves `A^T x = b`.
    pub(crate) fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        // U^T z = b, then L^T y = z, then x = P^T y.
        let mut z = b.to_vec();
        for j in 0..n {
            let col = self.lu.col(j);
            let s: f64 = (0..j).map(|i| col[i] * z[i]).sum();
            z[j] = (z[j] - s) / col[j];
        }
        for j in (0..n).rev() {
            let col = self.lu.col(j);
            let s: f64 = (j + 1..n).map(|i| col[i] * z[i]).sum();
            z[j] -= s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::blas::matmul;
    use crate::linalg::testutil::{gaussian, random_orthogonal};

    #[test]
    fn diagonal_bounds() {
        let a = DenseMatrix::from_diag(&[3.0, 1.0, 0.5]);
        let b = estimate_bounds(&a).unwrap();
        assert!((b.alpha - 10.25f64.sqrt()).abs() < 1e-15);
        assert!(b.beta <= 0.5 && b.beta > 0.4);
    }

    #[test]
    fn identity_bounds() {
        let b = estimate_bounds(&DenseMatrix::identity(6)).unwrap();
        assert!(b.alpha >= 1.0);
        assert!(b.beta > 0.0 && b.beta <= 1.0);
    }

    #[test]
    fn constructed_kappa_bounds_quality() {
        let n = 100;
        let kappa = 1e4;
        let sig: Vec<f64> = (0..n)
            .map(|i| 10f64.powf(-(kappa as f64).log10() * i as f64 / (n - 1) as f64))
            .collect();
        let u = random_orthogonal(n, 3);
        let v = random_orthogonal(n, 4);
        let a = matmul(&matmul(&u, &DenseMatrix::from_diag(&sig)).unwrap(), &v.transpose()).unwrap();
        let b = estimate_bounds(&a).unwrap();
        let smax = sig[0];
        let smin = sig[n - 1];
        assert!(b.alpha / smax >= 1.0 && b.alpha / smax <= (n as f64).sqrt());
        let ratio = smin / b.beta;
        assert!((1.0..=10.0).contains(&ratio), "sigma_min/beta = {ratio}");
    }

    #[test]
    fn tall_matrix_uses_the_triangular_factor() {
        let a = DenseMatrix::from_fn(5, 2, |i, j| if i == j { [2.0, 0.25][j] } else { 0.0 });
        let b = estimate_bounds(&a).unwrap();
        assert!(b.beta <= 0.25 && b.beta >= 0.2);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(estimate_bounds(&a), Err(Error::Singular(_))));
    }

    #[test]
    fn two_norm_of_known_spectrum() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let est = two_norm_estimate(&DenseMatrix::from_diag(&d));
        assert!((est - 10.0).abs() < 1e-5);
    }

    #[test]
    fn lu_solves_both_ways() {
        let a = gaussian(30, 30, 77);
        let lu = Lu::factor(&a).unwrap();
        let b: Vec<f64> = (0..30).map(|i| i as f64 - 3.0).collect();
        let x = lu.solve(&b);
        let ax = matvec(&a, &x);
        let y = lu.solve_transpose(&b);
        let aty = matvec_t(&a, &y);
        for i in 0..30 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
            assert!((aty[i] - b[i]).abs() < 1e-10);
        }
    }
}
