//! Level-3 plumbing over `matrixmultiply`, plus the flop instrument.
//!
//! The instrument is thread-local: [`count_flops`] installs a counter for the
//! duration of a closure and every kernel executed on that thread adds its
//! analytic multiply/add counts to it. Work executed on other threads is not
//! seen unless it is credited back with `record`, as the parallel pass does.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Multiply and add counts accumulated by the instrumented kernels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopCounter {
    pub mults: u64,
    pub adds: u64,
}

impl FlopCounter {
    pub fn total(&self) -> u64 {
        self.mults + self.adds
    }
}

thread_local! {
    static ACTIVE: Cell<Option<FlopCounter>> = const { Cell::new(None) };
}

/// Runs `f` with flop counting enabled on the current thread.
pub fn count_flops<T>(f: impl FnOnce() -> T) -> (T, FlopCounter) {
    let outer = ACTIVE.with(|c| c.replace(Some(FlopCounter::default())));
    let out = f();
    let counted = ACTIVE.with(|c| c.replace(outer)).unwrap_or_default();
    if let Some(mut o) = outer {
        o.mults += counted.mults;
        o.adds += counted.adds;
        ACTIVE.with(|c| c.set(Some(o)));
    }
    (out, counted)
}

#[inline]
pub(crate) fn record(mults: u64, adds: u64) {
    ACTIVE.with(|c| {
        if let Some(mut fc) = c.get() {
            fc.mults += mults;
            fc.adds += adds;
            c.set(Some(fc));
        }
    });
}

/// Transposition flag for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    NoTrans,
    Trans,
}

/// Strided view used by the raw kernel entry point.
#[derive(Clone, Copy)]
pub(crate) struct Strided<'a> {
    pub data: &'a [f64],
    pub rs: usize,
    pub cs: usize,
}

pub(crate) struct StridedMut<'a> {
    pub data: &'a mut [f64],
    pub rs: usize,
    pub cs: usize,
}

#[inline]
fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// `C[m x n] = alpha * A[m x k] * B[k x n] + beta * C` on strided slices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: Strided<'_>,
    b: Strided<'_>,
    beta: f64,
    c: StridedMut<'_>,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.data.len() >= extent(m, k, a.rs, a.cs), "gemm: A out of bounds");
    assert!(b.data.len() >= extent(k, n, b.rs, b.cs), "gemm: B out of bounds");
    assert!(c.data.len() >= extent(m, n, c.rs, c.cs), "gemm: C out of bounds");
    record((m * n * k) as u64, (m * n * k) as u64);
    // SAFETY: extents checked above; `c` is exclusively borrowed and cannot
    // alias `a` or `b`, which are shared borrows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

fn view(m: &DenseMatrix, op: Op) -> (usize, usize, Strided<'_>) {
    let ld = m.rows();
    match op {
        Op::NoTrans => (
            m.rows(),
            m.cols(),
            Strided {
                data: m.as_slice(),
                rs: 1,
                cs: ld,
            },
        ),
        Op::Trans => (
            m.cols(),
            m.rows(),
            Strided {
                data: m.as_slice(),
                rs: ld,
                cs: 1,
            },
        ),
    }
}

/// `C = alpha * op(A) * op(B) + beta * C`.
pub fn gemm(
    alpha: f64,
    a: &DenseMatrix,
    op_a: Op,
    b: &DenseMatrix,
    op_b: Op,
    beta: f64,
    c: &mut DenseMatrix,
) -> Result<()> {
    let (am, ak, av) = view(a, op_a);
    let (bk, bn, bv) = view(b, op_b);
    if ak != bk || c.rows() != am || c.cols() != bn {
        return Err(Error::shape(format!(
            "gemm: op(A) {am}x{ak}, op(B) {bk}x{bn}, C {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let ldc = c.rows();
    gemm_raw(
        am,
        ak,
        bn,
        alpha,
        av,
        bv,
        beta,
        StridedMut {
            data: c.as_mut_slice(),
            rs: 1,
            cs: ldc,
        },
    );
    Ok(())
}

/// `op(A) * op(B)` into a fresh matrix.
pub fn matmul_op(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op) -> Result<DenseMatrix> {
    let m = if op_a == Op::NoTrans { a.rows() } else { a.cols() };
    let n = if op_b == Op::NoTrans { b.cols() } else { b.rows() };
    let mut c = DenseMatrix::zeros(m, n);
    gemm(1.0, a, op_a, b, op_b, 0.0, &mut c)?;
    Ok(c)
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    matmul_op(a, Op::NoTrans, b, Op::NoTrans)
}

/// Gram matrix `A^T A`, exactly symmetric.
pub fn gram(a: &DenseMatrix) -> DenseMatrix {
    let mut g = matmul_op(a, Op::Trans, a, Op::NoTrans).expect("conforming by construction");
    g.symmetrize();
    g
}

/// `||I - A^T A||_F / n` for an m-by-n matrix `A`.
pub fn orthogonality_defect(a: &DenseMatrix) -> f64 {
    let n = a.cols();
    if n == 0 {
        return 0.0;
    }
    let mut g = gram(a);
    for i in 0..n {
        g[(i, i)] -= 1.0;
    }
    g.frobenius_norm() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_identity_is_noop() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 2.5);
        let i4 = DenseMatrix::identity(4);
        assert_eq!(matmul(&i4, &a).unwrap(), a);
    }

    #[test]
    fn gemm_transposes_agree_with_explicit_transpose() {
        let a = DenseMatrix::from_fn(5, 3, |i, j| ((i + 1) * (j + 2)) as f64 / 7.0);
        let b = DenseMatrix::from_fn(5, 4, |i, j| (i as f64 - j as f64).sin());
        let lhs = matmul_op(&a, Op::Trans, &b, Op::NoTrans).unwrap();
        let rhs = matmul(&a.transpose(), &b).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn flop_counter_sees_gemm_and_nests() {
        let a = DenseMatrix::identity(10);
        let ((_, inner), outer) = count_flops(|| {
            let _ = matmul(&a, &a).unwrap();
            count_flops(|| matmul(&a, &a).unwrap())
        });
        assert_eq!(inner.mults, 1000);
        assert_eq!(outer.mults, 2000);
        let (_, none) = count_flops(|| ());
        assert_eq!(none, FlopCounter::default());
    }
}
