//! Blocked Householder QR (compact WY) and the structured QR of `[X; sqrt(c) I]`.
//!
//! Both factorizations share one panel kernel. The only difference is the row
//! range each panel acts on: the dense factorization sweeps rows `j0..M`,
//! while the structured one stops at `m + j0 + jb`. Rows past that limit are
//! still rows of the untouched `sqrt(c) I` block and are zero in every panel
//! column, so every reflector of the structured variant spans at most
//! `m + nb` rows.

use super::blas::{gemm_raw, record, Strided, StridedMut};
use super::matrix::{frobenius, DenseMatrix};
use crate::error::{Error, Result};

/// Default panel width.
pub const DEFAULT_NB: usize = 64;

/// One factored panel: explicit reflectors `V` (unit lower trapezoidal) and
/// the upper triangular `T` with `H_j0 ... H_{j0+jb-1} = I - V T V^T`.
struct Panel {
    j0: usize,
    row_end: usize,
    v: DenseMatrix,
    t: DenseMatrix,
}

/// Reduces `a` in place to `R` (upper triangle) and returns the panels.
fn factor_panels(
    a: &mut DenseMatrix,
    nb: usize,
    row_end: impl Fn(usize, usize) -> usize,
) -> Vec<Panel> {
    let (big_m, n) = a.shape();
    let kmax = big_m.min(n);
    let mut panels = Vec::with_capacity(kmax.div_ceil(nb));
    let mut j0 = 0;
    while j0 < kmax {
        let jb = nb.min(kmax - j0);
        let re = row_end(j0, jb).min(big_m);
        debug_assert!(panel_tail_is_zero(a, j0, jb, re));
        let mut taus = vec![0.0; jb];
        for k in j0..j0 + jb {
            taus[k - j0] = householder_column(a, k, re, j0 + jb);
        }

        let len = re - j0;
        let v = DenseMatrix::from_fn(len, jb, |i, kk| {
            let row = j0 + i;
            let col = j0 + kk;
            match row.cmp(&col) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => a[(row, col)],
            }
        });
        let t = form_t(&v, &taus);

        let nc = n - (j0 + jb);
        if nc > 0 {
            apply_block_reflector(&v, &t, true, a, j0, j0 + jb, nc);
        }
        panels.push(Panel {
            j0,
            row_end: re,
            v,
            t,
        });
        j0 += jb;
    }
    panels
}

fn panel_tail_is_zero(a: &DenseMatrix, j0: usize, jb: usize, re: usize) -> bool {
    (j0..j0 + jb).all(|j| (re..a.rows()).all(|i| a[(i, j)] == 0.0))
}

/// Generates the reflector for column `k` over rows `k..re` and applies it to
/// columns `k+1..col_end`. Returns `tau`; the reflector tail overwrites `a`.
fn householder_column(a: &mut DenseMatrix, k: usize, re: usize, col_end: usize) -> f64 {
    let lda = a.rows();
    let data = a.as_mut_slice();
    let alpha = data[k * lda + k];
    let xnorm = frobenius(&data[k * lda + k + 1..k * lda + re]);
    record((re - k) as u64, (re - k) as u64);
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let tau = (beta - alpha) / beta;
    let inv = 1.0 / (alpha - beta);
    for x in &mut data[k * lda + k + 1..k * lda + re] {
        *x *= inv;
    }
    data[k * lda + k] = beta;
    record((re - k) as u64, 0);

    let (head, tail) = data.split_at_mut((k + 1) * lda);
    let v = &head[k * lda + k + 1..k * lda + re];
    for j in 0..col_end.saturating_sub(k + 1) {
        let col = &mut tail[j * lda + k..j * lda + re];
        let mut dot = col[0];
        for (c, vi) in col[1..].iter().zip(v) {
            dot += c * vi;
        }
        let s = tau * dot;
        col[0] -= s;
        for (c, vi) in col[1..].iter_mut().zip(v) {
            *c -= s * vi;
        }
    }
    let w = (col_end.saturating_sub(k + 1) * (re - k)) as u64;
    record(2 * w, 2 * w);
    tau
}

/// Forward, column-wise `T` of the compact WY representation.
fn form_t(v: &DenseMatrix, taus: &[f64]) -> DenseMatrix {
    let jb = taus.len();
    let len = v.rows();
    let mut t = DenseMatrix::zeros(jb, jb);
    for k in 0..jb {
        t[(k, k)] = taus[k];
        if k == 0 || taus[k] == 0.0 {
            continue;
        }
        // w = V[:, 0..k]^T v_k, using the zero structure of the columns.
        let vk = v.col(k);
        let mut w = vec![0.0; k];
        for (i, wi) in w.iter_mut().enumerate() {
            let vi = v.col(i);
            *wi = (k..len).map(|r| vi[r] * vk[r]).sum();
        }
        record((k * (len - k)) as u64, (k * (len - k)) as u64);
        for i in 0..k {
            let s: f64 = (i..k).map(|l| t[(i, l)] * w[l]).sum();
            t[(i, k)] = -taus[k] * s;
        }
        record((k * k / 2) as u64, (k * k / 2) as u64);
    }
    t
}

/// Applies `H = I - V T V^T` (or `H^T` when `transpose`) from the left to
/// rows `row0..row0+V.rows()` of columns `c0..c0+nc` of `target`.
fn apply_block_reflector(
    v: &DenseMatrix,
    t: &DenseMatrix,
    transpose: bool,
    target: &mut DenseMatrix,
    row0: usize,
    c0: usize,
    nc: usize,
) {
    let (len, jb) = v.shape();
    let ld = target.rows();
    let off = c0 * ld + row0;
    let v_view = Strided {
        data: v.as_slice(),
        rs: 1,
        cs: len,
    };
    let vt_view = Strided {
        data: v.as_slice(),
        rs: len,
        cs: 1,
    };
    // W = V^T C
    let mut w = DenseMatrix::zeros(jb, nc);
    gemm_raw(
        jb,
        len,
        nc,
        1.0,
        vt_view,
        Strided {
            data: &target.as_slice()[off..],
            rs: 1,
            cs: ld,
        },
        0.0,
        StridedMut {
            data: w.as_mut_slice(),
            rs: 1,
            cs: jb,
        },
    );
    // W = op(T) W
    let t_view = if transpose {
        Strided {
            data: t.as_slice(),
            rs: jb,
            cs: 1,
        }
    } else {
        Strided {
            data: t.as_slice(),
            rs: 1,
            cs: jb,
        }
    };
    let mut tw = DenseMatrix::zeros(jb, nc);
    gemm_raw(
        jb,
        jb,
        nc,
        1.0,
        t_view,
        Strided {
            data: w.as_slice(),
            rs: 1,
            cs: jb,
        },
        0.0,
        StridedMut {
            data: tw.as_mut_slice(),
            rs: 1,
            cs: jb,
        },
    );
    // C -= V W
    gemm_raw(
        len,
        jb,
        nc,
        -1.0,
        v_view,
        Strided {
            data: tw.as_slice(),
            rs: 1,
            cs: jb,
        },
        1.0,
        StridedMut {
            data: &mut target.as_mut_slice()[off..],
            rs: 1,
            cs: ld,
        },
    );
}

/// Accumulates the thin `Q` (M x kmax) from the panels, last panel first.
fn form_q(big_m: usize, kmax: usize, panels: &[Panel]) -> DenseMatrix {
    let mut q = DenseMatrix::eye(big_m, kmax);
    for p in panels.iter().rev() {
        debug_assert_eq!(p.v.rows(), p.row_end - p.j0);
        apply_block_reflector(&p.v, &p.t, false, &mut q, p.j0, p.j0, kmax - p.j0);
    }
    q
}

/// Flips signs so that `R` has a nonnegative diagonal.
fn normalize_signs(q: &mut DenseMatrix, r: &mut DenseMatrix) {
    for i in 0..r.rows() {
        if r[(i, i)] < 0.0 {
            for j in i..r.cols() {
                r[(i, j)] = -r[(i, j)];
            }
            for x in q.col_mut(i) {
                *x = -*x;
            }
        }
    }
}

fn upper_triangle(a: &DenseMatrix, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { 0.0 })
}

/// Thin QR with `Q` m-by-n orthonormal and `R` n-by-n upper triangular with
/// nonnegative diagonal. Requires `m >= n`.
pub fn householder_qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    householder_qr_blocked(m, DEFAULT_NB)
}

/// [`householder_qr`] with an explicit panel width.
pub fn householder_qr_blocked(m: &DenseMatrix, nb: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::shape(format!("householder_qr needs m >= n, got {rows}x{cols}")));
    }
    if nb == 0 {
        return Err(Error::domain("block size must be positive"));
    }
    let mut a = m.clone();
    let panels = factor_panels(&mut a, nb.min(cols.max(1)), |_, _| rows);
    let mut r = upper_triangle(&a, cols);
    let mut q = form_q(rows, cols, &panels);
    normalize_signs(&mut q, &mut r);
    Ok((q, r))
}

/// Factors of `[X; sqrt(c) I] = [Q1; Q2] R`.
#[derive(Debug, Clone)]
pub struct StructuredQrResult {
    pub q1: DenseMatrix,
    pub q2: DenseMatrix,
    pub r_factor: DenseMatrix,
}

impl StructuredQrResult {
    /// `Q1 Q2^T`, the quantity the polar iterations consume.
    pub fn q1_q2t(&self) -> DenseMatrix {
        super::blas::matmul_op(&self.q1, super::blas::Op::NoTrans, &self.q2, super::blas::Op::Trans)
            .expect("conforming by construction")
    }
}

/// Selects the kernel used for `[X; sqrt(c) I]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StackedQrKernel {
    #[default]
    Structured,
    Dense,
}

fn stacked(x: &DenseMatrix, c: f64) -> DenseMatrix {
    let (m, n) = x.shape();
    let s = c.sqrt();
    DenseMatrix::from_fn(m + n, n, |i, j| {
        if i < m {
            x[(i, j)]
        } else if i - m == j {
            s
        } else {
            0.0
        }
    })
}

fn check_stacked_args(x: &DenseMatrix, c: f64, nb: usize) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("shift must be positive and finite, got {c}")));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::shape("empty operand"));
    }
    if nb == 0 {
        return Err(Error::domain("block size must be positive"));
    }
    Ok(())
}

fn split_stacked(q: DenseMatrix, r: DenseMatrix, m: usize) -> StructuredQrResult {
    let big_m = q.rows();
    StructuredQrResult {
        q1: q.rows_range(0, m),
        q2: q.rows_range(m, big_m),
        r_factor: r,
    }
}

/// QR of `[X; sqrt(c) I]` exploiting the identity block. `nb` larger than
/// the column count is clamped.
pub fn structured_qr(x: &DenseMatrix, c: f64, nb: usize) -> Result<StructuredQrResult> {
    check_stacked_args(x, c, nb)?;
    let (m, n) = x.shape();
    let nb = nb.min(n);
    let mut a = stacked(x, c);
    let panels = factor_panels(&mut a, nb, |j0, jb| {
        debug_assert!(jb <= nb);
        m + j0 + jb
    });
    debug_assert!(panels.iter().all(|p| p.row_end - p.j0 <= m + nb));
    let mut r = upper_triangle(&a, n);
    let mut q = form_q(m + n, n, &panels);
    normalize_signs(&mut q, &mut r);
    Ok(split_stacked(q, r, m))
}

/// The same factorization through the dense kernel; the reference the
/// structured variant is measured against.
pub fn stacked_qr_dense(x: &DenseMatrix, c: f64, nb: usize) -> Result<StructuredQrResult> {
    check_stacked_args(x, c, nb)?;
    let m = x.rows();
    let (q, r) = householder_qr_blocked(&stacked(x, c), nb)?;
    Ok(split_stacked(q, r, m))
}

pub fn stacked_qr(
    x: &DenseMatrix,
    c: f64,
    nb: usize,
    kernel: StackedQrKernel,
) -> Result<StructuredQrResult> {
    match kernel {
        StackedQrKernel::Structured => structured_qr(x, c, nb),
        StackedQrKernel::Dense => stacked_qr_dense(x, c, nb),
    }
}
