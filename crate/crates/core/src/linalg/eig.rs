//! Symmetric eigensolver: Householder tridiagonalization followed by the
//! implicit QL iteration with eigenvector accumulation.

use super::cholesky::SYMMETRY_TOL;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix; `values` ascending, `vectors` columns
/// in the same order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

pub fn sym_eig(h: &DenseMatrix) -> Result<SymEig> {
    if !h.is_square() {
        return Err(Error::shape(format!("sym_eig needs a square matrix, got {:?}", h.shape())));
    }
    let asym = h.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = h.rows();
    if n == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut v = h.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok(SymEig { values, vectors })
}

/// Reduces `v` (holding the symmetric input) to tridiagonal form, leaving
/// the accumulated orthogonal transform in `v`, the diagonal in `d` and the
/// subdiagonal in `e[1..]`.
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                let col = v.col(j);
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = v.col_mut(j);
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let max_sweeps = 30 * n.max(1);
    let mut sweeps = 0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NonConvergence {
                        method: "sym_eig",
                        iters: sweeps,
                        log: Vec::new(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_columns(v, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn rotate_columns(v: &mut DenseMatrix, i: usize, c: f64, s: f64) {
    let n = v.rows();
    let (left, right) = v.as_mut_slice().split_at_mut((i + 1) * n);
    let vi = &mut left[i * n..];
    let vj = &mut right[..n];
    for (a, b) in vi.iter_mut().zip(vj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::blas::{matmul, matmul_op, orthogonality_defect, Op};
    use crate::linalg::testutil::random_orthogonal;

    fn residual(h: &DenseMatrix, eig: &SymEig) -> f64 {
        let hv = matmul(h, &eig.vectors).unwrap();
        let vl = matmul(&eig.vectors, &DenseMatrix::from_diag(&eig.values)).unwrap();
        hv.sub(&vl).unwrap().frobenius_norm() / h.frobenius_norm()
    }

    #[test]
    fn identity_keeps_every_vector() {
        let h = DenseMatrix::identity(5);
        let eig = sym_eig(&h).unwrap();
        assert!(eig.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        assert!(matmul(&h, &eig.vectors).unwrap().max_abs_diff(&eig.vectors) < 1e-15);
    }

    #[test]
    fn two_by_two_spectrum() {
        let h = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let eig = sym_eig(&h).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn one_by_one() {
        let eig = sym_eig(&DenseMatrix::from_diag(&[-4.0])).unwrap();
        assert_eq!(eig.values, vec![-4.0]);
        assert_eq!(eig.vectors[(0, 0)].abs(), 1.0);
    }

    #[test]
    fn constructed_spectrum_is_recovered() {
        let n = 80;
        let q = random_orthogonal(n, 21);
        let lam: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let qd = matmul(&q, &DenseMatrix::from_diag(&lam)).unwrap();
        let mut h = matmul_op(&qd, Op::NoTrans, &q, Op::Trans).unwrap();
        h.symmetrize();
        let eig = sym_eig(&h).unwrap();
        for (got, want) in eig.values.iter().zip(&lam) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(residual(&h, &eig) < 1e-13);
        assert!(orthogonality_defect(&eig.vectors) < 1e-14);
        let tr: f64 = eig.values.iter().sum();
        assert!((tr - h.trace()).abs() <= 1e-12 * h.trace().abs());
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let h = DenseMatrix::from_row_major(2, 2, &[1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&h), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn diagonal_with_zeros_and_repeats() {
        let h = DenseMatrix::from_diag(&[0.0, 2.0, 2.0, -1.0, 0.0]);
        let eig = sym_eig(&h).unwrap();
        assert_eq!(eig.values, vec![-1.0, 0.0, 0.0, 2.0, 2.0]);
        assert!(residual(&h, &eig) < 1e-15);
    }
}
