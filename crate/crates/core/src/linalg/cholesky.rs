//! Blocked Cholesky factorization and the right-sided triangular solves the
//! Cholesky branches of the polar iterations need.

use super::blas::{gemm_raw, record, Strided, StridedMut};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const NB: usize = 64;

/// Symmetry tolerance accepted on input, relative in Frobenius norm.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Lower Cholesky factor `L` with `Z = L L^T`. Only the lower triangle of
/// `z` is read once symmetry has been checked.
pub fn cholesky(z: &DenseMatrix) -> Result<DenseMatrix> {
    if !z.is_square() {
        return Err(Error::shape(format!("cholesky needs a square matrix, got {:?}", z.shape())));
    }
    let asym = z.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = z.rows();
    let mut a = z.clone();
    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        factor_diagonal_block(&mut a, k0, kb)?;
        let below = n - k0 - kb;
        if below > 0 {
            panel_solve(&mut a, k0, kb);
            // A22 -= L21 L21^T over the full trailing square.
            let ld = n;
            let (head, tail) = a.as_mut_slice().split_at_mut((k0 + kb) * ld);
            let l21 = &head[k0 * ld + k0 + kb..];
            gemm_raw(
                below,
                kb,
                below,
                -1.0,
                Strided {
                    data: l21,
                    rs: 1,
                    cs: ld,
                },
                Strided {
                    data: l21,
                    rs: ld,
                    cs: 1,
                },
                1.0,
                StridedMut {
                    data: &mut tail[k0 + kb..],
                    rs: 1,
                    cs: ld,
                },
            );
        }
        k0 += kb;
    }
    for j in 0..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(a)
}

fn factor_diagonal_block(a: &mut DenseMatrix, k0: usize, kb: usize) -> Result<()> {
    for j in k0..k0 + kb {
        let mut d = a[(j, j)];
        for l in k0..j {
            d -= a[(j, l)] * a[(j, l)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        a[(j, j)] = djj;
        for i in j + 1..k0 + kb {
            let mut s = a[(i, j)];
            for l in k0..j {
                s -= a[(i, l)] * a[(j, l)];
            }
            a[(i, j)] = s / djj;
        }
    }
    record((kb * kb * kb / 3) as u64, (kb * kb * kb / 3) as u64);
    Ok(())
}

/// `L21 = A21 L11^{-T}` column by column.
fn panel_solve(a: &mut DenseMatrix, k0: usize, kb: usize) {
    let n = a.rows();
    let r0 = k0 + kb;
    for j in k0..k0 + kb {
        for l in k0..j {
            let f = a[(j, l)];
            if f != 0.0 {
                for i in r0..n {
                    let v = a[(i, l)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        let inv = 1.0 / a[(j, j)];
        for i in r0..n {
            a[(i, j)] *= inv;
        }
    }
    let w = ((n - r0) * kb * kb / 2) as u64;
    record(w, w);
}

/// `B <- B L^{-T}` for lower triangular `L`.
pub fn solve_right_lower_transpose(b: &mut DenseMatrix, l: &DenseMatrix) -> Result<()> {
    check_trsm(b, l)?;
    let (m, n) = b.shape();
    let mut j0 = 0;
    while j0 < n {
        let jb = NB.min(n - j0);
        if j0 > 0 {
            // B[:, J] -= W[:, 0..j0] * L[J, 0..j0]^T
            let (done, rest) = b.as_mut_slice().split_at_mut(j0 * m);
            gemm_raw(
                m,
                j0,
                jb,
                -1.0,
                Strided {
                    data: done,
                    rs: 1,
                    cs: m,
                },
                Strided {
                    data: &l.as_slice()[j0..],
                    rs: n,
                    cs: 1,
                },
                1.0,
                StridedMut {
                    data: rest,
                    rs: 1,
                    cs: m,
                },
            );
        }
        for j in j0..j0 + jb {
            for i in j0..j {
                let f = l[(j, i)];
                if f != 0.0 {
                    let (src, dst) = b.as_mut_slice().split_at_mut(j * m);
                    axpy_slice(-f, &src[i * m..(i + 1) * m], &mut dst[..m]);
                }
            }
            let inv = 1.0 / l[(j, j)];
            b.col_mut(j).iter_mut().for_each(|x| *x *= inv);
        }
        record((m * jb * jb / 2) as u64, (m * jb * jb / 2) as u64);
        j0 += jb;
    }
    Ok(())
}

/// `B <- B L^{-1}` for lower triangular `L`.
pub fn solve_right_lower(b: &mut DenseMatrix, l: &DenseMatrix) -> Result<()> {
    check_trsm(b, l)?;
    let (m, n) = b.shape();
    let mut j1 = n;
    while j1 > 0 {
        let jb = NB.min(j1);
        let j0 = j1 - jb;
        if j1 < n {
            // B[:, J] -= Y[:, j1..n] * L[j1..n, J]
            let (head, done) = b.as_mut_slice().split_at_mut(j1 * m);
            gemm_raw(
                m,
                n - j1,
                jb,
                -1.0,
                Strided {
                    data: done,
                    rs: 1,
                    cs: m,
                },
                Strided {
                    data: &l.as_slice()[j0 * n + j1..],
                    rs: 1,
                    cs: n,
                },
                1.0,
                StridedMut {
                    data: &mut head[j0 * m..],
                    rs: 1,
                    cs: m,
                },
            );
        }
        for j in (j0..j1).rev() {
            for i in j + 1..j1 {
                let f = l[(i, j)];
                if f != 0.0 {
                    let (dst, src) = b.as_mut_slice().split_at_mut(i * m);
                    axpy_slice(-f, &src[..m], &mut dst[j * m..(j + 1) * m]);
                }
            }
            let inv = 1.0 / l[(j, j)];
            b.col_mut(j).iter_mut().for_each(|x| *x *= inv);
        }
        record((m * jb * jb / 2) as u64, (m * jb * jb / 2) as u64);
        j1 = j0;
    }
    Ok(())
}

/// `X (L L^T)^{-1}` computed as `(X L^{-T}) L^{-1}`.
pub fn solve_right_cholesky(x: &DenseMatrix, l: &DenseMatrix) -> Result<DenseMatrix> {
    let mut w = x.clone();
    solve_right_lower_transpose(&mut w, l)?;
    solve_right_lower(&mut w, l)?;
    Ok(w)
}

fn check_trsm(b: &DenseMatrix, l: &DenseMatrix) -> Result<()> {
    if !l.is_square() || b.cols() != l.rows() {
        return Err(Error::shape(format!(
            "triangular solve: B {:?}, L {:?}",
            b.shape(),
            l.shape()
        )));
    }
    Ok(())
}

#[inline]
fn axpy_slice(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::blas::{gram, matmul, matmul_op, Op};
    use crate::linalg::testutil::gaussian;

    #[test]
    fn identity_factor() {
        let l = cholesky(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(l, DenseMatrix::identity(4));
    }

    #[test]
    fn two_by_two_is_forced() {
        let z = DenseMatrix::from_row_major(2, 2, &[4.0, 2.0, 2.0, 5.0]).unwrap();
        let l = cholesky(&z).unwrap();
        let want = DenseMatrix::from_row_major(2, 2, &[2.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(l.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn gram_plus_shift_reconstructs() {
        // Crosses several diagonal blocks.
        let x = gaussian(100, 100, 5);
        let mut z = gram(&x);
        for i in 0..100 {
            z[(i, i)] += 0.5;
        }
        let l = cholesky(&z).unwrap();
        let llt = matmul_op(&l, Op::NoTrans, &l, Op::Trans).unwrap();
        assert!(llt.sub(&z).unwrap().frobenius_norm() <= 1e-13 * z.frobenius_norm());
    }

    #[test]
    fn indefinite_is_reported_with_pivot_index() {
        let z = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        match cholesky(&z) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let z = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(cholesky(&z), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn right_solves_invert_the_factor() {
        let n = 150;
        let x = gaussian(n, n, 9);
        let mut z = gram(&x);
        for i in 0..n {
            z[(i, i)] += 1.0;
        }
        let l = cholesky(&z).unwrap();
        let b = gaussian(37, n, 10);
        let y = solve_right_cholesky(&b, &l).unwrap();
        let back = matmul(&y, &z).unwrap();
        let rel = back.sub(&b).unwrap().frobenius_norm() / b.frobenius_norm();
        assert!(rel < 1e-11, "{rel:e}");
    }
}
