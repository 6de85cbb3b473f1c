//! Polar decomposition `A = Q_p H` by the dynamically weighted Halley
//! iteration (QDWH) and by Zolotarev-function iteration (Zolo-PD).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::{
    coeffs_from_pair, ell_update, ell_update_deviation, ZolotarevParams, MAX_ORDER,
};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, gram, matmul_op, solve_right_cholesky, stacked_qr, DenseMatrix, Op,
    StackedQrKernel, DEFAULT_NB,
};
use crate::parallel::{run_zolo_pass, ExecutionPlan};

/// Convergence parameter used when none is given: the unit roundoff 2^-52.
pub const DEFAULT_TOL: f64 = f64::EPSILON;
pub const QDWH_MAX_ITERS: usize = 12;
pub const ZOLO_MAX_PASSES: usize = 8;
/// QDWH uses the QR form while `c_k` exceeds this.
pub const QDWH_SWITCH_C: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Qr,
    Cholesky,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Qr => "qr",
            Branch::Cholesky => "cholesky",
        }
    }
}

/// One iteration (QDWH) or one pass (Zolo-PD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub branch: Branch,
    pub ell_before: f64,
    pub ell_after: f64,
    /// `||X_{k+1} - X_k||_F / ||X_{k+1}||_F`.
    pub step_delta: f64,
    pub seconds: f64,
    /// Terms whose Cholesky factorization failed and were redone with QR.
    pub qr_fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct PolarResult {
    pub q_p: DenseMatrix,
    pub h: DenseMatrix,
    pub iters: usize,
    pub log: Vec<IterationRecord>,
}

/// Kernel settings shared by both iterations.
#[derive(Debug, Clone)]
pub struct PolarOptions {
    pub tol: f64,
    pub nb: usize,
    pub kernel: StackedQrKernel,
    /// Worker groups for the Zolotarev terms; `None` runs them serially.
    pub plan: Option<ExecutionPlan>,
}

impl Default for PolarOptions {
    fn default() -> Self {
        PolarOptions {
            tol: DEFAULT_TOL,
            nb: DEFAULT_NB,
            kernel: StackedQrKernel::Structured,
            plan: None,
        }
    }
}

impl PolarOptions {
    pub fn with_tol(tol: f64) -> Self {
        PolarOptions {
            tol,
            ..Default::default()
        }
    }
}

/// QDWH weights `(a, b, c)` for the interval `[ell, 1]`.
pub fn qdwh_weights(ell: f64) -> (f64, f64, f64) {
    let l2 = ell * ell;
    let gamma = (4.0 * (1.0 - l2) / (l2 * l2)).cbrt();
    let s = (1.0 + gamma).sqrt();
    let a = s + 0.5 * (8.0 - 4.0 * gamma + 8.0 * (2.0 - l2) / (l2 * s)).sqrt();
    let b = (a - 1.0).powi(2) / 4.0;
    let c = a + b - 1.0;
    (a, b, c)
}

/// `||next - prev||_F / ||next||_F`.
pub fn step_delta(prev: &DenseMatrix, next: &DenseMatrix) -> Result<f64> {
    let diff = next.sub(prev)?;
    let nn = next.frobenius_norm();
    Ok(if nn == 0.0 {
        diff.frobenius_norm()
    } else {
        diff.frobenius_norm() / nn
    })
}

/// True when the relative step is at most `tol^(1/(2r+1))`.
pub fn check_convergence(
    x_prev: &DenseMatrix,
    x_next: &DenseMatrix,
    r: usize,
    tol: f64,
) -> Result<bool> {
    Ok(step_delta(x_prev, x_next)? <= convergence_threshold(r, tol))
}

pub fn convergence_threshold(r: usize, tol: f64) -> f64 {
    tol.powf(1.0 / (2 * r + 1) as f64)
}

/// `(Q_p^T A + (Q_p^T A)^T) / 2`.
pub fn assemble_h(q_p: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    let mut h = matmul_op(q_p, Op::Trans, a, Op::NoTrans)?;
    h.symmetrize();
    Ok(h)
}

fn check_inputs(a: &DenseMatrix, alpha: f64, beta: f64, tol: f64) -> Result<()> {
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return Err(Error::shape(format!("polar decomposition expects m >= n >= 1, got {m}x{n}")));
    }
    if !a.is_finite() {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain(format!("tol must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

pub fn qdwh_pd(a: &DenseMatrix, alpha: f64, beta: f64, tol: f64) -> Result<PolarResult> {
    qdwh_pd_with(a, alpha, beta, &PolarOptions::with_tol(tol))
}

pub fn qdwh_pd_with(
    a: &DenseMatrix,
    alpha: f64,
    beta: f64,
    opts: &PolarOptions,
) -> Result<PolarResult> {
    check_inputs(a, alpha, beta, opts.tol)?;
    let threshold = convergence_threshold(1, opts.tol);
    let mut x = a.scaled(1.0 / alpha);
    let mut ell = (beta / alpha).min(1.0);
    let mut log = Vec::new();
    for k in 1..=QDWH_MAX_ITERS {
        let t0 = Instant::now();
        let (wa, wb, wc) = qdwh_weights(ell);
        let mut fallbacks = 0;
        let (branch, x_next) = if wc > QDWH_SWITCH_C {
            (Branch::Qr, qdwh_qr_step(&x, wa, wb, wc, opts)?)
        } else {
            match qdwh_cholesky_step(&x, wa, wb, wc) {
                Ok(xn) => (Branch::Cholesky, xn),
                Err(Error::NotPositiveDefinite { .. }) => {
                    fallbacks = 1;
                    (Branch::Qr, qdwh_qr_step(&x, wa, wb, wc, opts)?)
                }
                Err(e) => return Err(e),
            }
        };
        let delta = step_delta(&x, &x_next)?;
        let l2 = ell * ell;
        let ell_next = (ell * (wa + wb * l2) / (1.0 + wc * l2)).clamp(ell, 1.0);
        log.push(IterationRecord {
            index: k,
            branch,
            ell_before: ell,
            ell_after: ell_next,
            step_delta: delta,
            seconds: t0.elapsed().as_secs_f64(),
            qr_fallbacks: fallbacks,
        });
        x = x_next;
        ell = ell_next;
        if delta <= threshold {
            let h = assemble_h(&x, a)?;
            return Ok(PolarResult {
                q_p: x,
                h,
                iters: k,
                log,
            });
        }
    }
    Err(Error::NonConvergence {
        method: "qdwh",
        iters: QDWH_MAX_ITERS,
        log,
    })
}

/// `X' = (b/c) X + (a - b/c)/sqrt(c) Q1 Q2^T` with `[sqrt(c) X; I] = Q R`.
pub fn qdwh_qr_step(
    x: &DenseMatrix,
    a: f64,
    b: f64,
    c: f64,
    opts: &PolarOptions,
) -> Result<DenseMatrix> {
    // [sqrt(c) X; I] and [X; I/sqrt(c)] share their Q factor.
    let qr = stacked_qr(x, 1.0 / c, opts.nb, opts.kernel)?;
    let mut out = qr.q1_q2t();
    out.scale_in_place((a - b / c) / c.sqrt());
    out.axpy(b / c, x)?;
    Ok(out)
}

/// `X' = (b/c) X + (a - b/c) X Z^{-1}` with `Z = I + c X^T X`.
pub fn qdwh_cholesky_step(x: &DenseMatrix, a: f64, b: f64, c: f64) -> Result<DenseMatrix> {
    let mut z = gram(x);
    z.scale_in_place(c);
    for i in 0..z.rows() {
        z[(i, i)] += 1.0;
    }
    let l = cholesky(&z)?;
    let mut out = solve_right_cholesky(x, &l)?;
    out.scale_in_place(a - b / c);
    out.axpy(b / c, x)?;
    Ok(out)
}

pub fn zolo_pd(a: &DenseMatrix, alpha: f64, beta: f64, r: usize, tol: f64) -> Result<PolarResult> {
    zolo_pd_with(a, alpha, beta, r, &PolarOptions::with_tol(tol))
}

pub fn zolo_pd_with(
    a: &DenseMatrix,
    alpha: f64,
    beta: f64,
    r: usize,
    opts: &PolarOptions,
) -> Result<PolarResult> {
    if r == 0 || r > MAX_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    check_inputs(a, alpha, beta, opts.tol)?;
    if let Some(plan) = &opts.plan {
        if plan.r != r {
            return Err(Error::InfeasiblePlan {
                workers: plan.total_workers,
                groups: r,
            });
        }
    }
    let threshold = convergence_threshold(r, opts.tol);
    let mut x = a.scaled(1.0 / alpha);
    let ratio = beta / alpha;
    let (mut ell, mut dev) = if ratio >= 1.0 {
        (1.0, 0.0)
    } else {
        (ratio, (alpha - beta) / alpha)
    };
    let skip_qr = 1.0 / ell < 2.0;
    let mut log = Vec::new();
    for pass in 1..=ZOLO_MAX_PASSES {
        let t0 = Instant::now();
        let p = coeffs_from_pair(r, ell, dev)?;
        let stage = if pass == 1 && !skip_qr {
            Branch::Qr
        } else {
            Branch::Cholesky
        };
        let out = run_zolo_pass(&x, &p, stage, opts)?;
        let delta = step_delta(&x, &out.x)?;
        let next_dev = ell_update_deviation(&p).max(0.0);
        let next_ell = if next_dev < 0.5 {
            1.0 - next_dev
        } else {
            ell_update(&p)
        }
        .clamp(ell, 1.0);
        log.push(IterationRecord {
            index: pass,
            branch: stage,
            ell_before: ell,
            ell_after: next_ell,
            step_delta: delta,
            seconds: t0.elapsed().as_secs_f64(),
            qr_fallbacks: out.fallbacks,
        });
        x = out.x;
        if delta <= threshold {
            let h = assemble_h(&x, a)?;
            return Ok(PolarResult {
                q_p: x,
                h,
                iters: pass,
                log,
            });
        }
        ell = next_ell;
        dev = next_dev.min(dev);
    }
    Err(Error::NonConvergence {
        method: "zolo",
        iters: ZOLO_MAX_PASSES,
        log,
    })
}

/// Term `j` of a Zolotarev pass, `a_j X (X^T X + c_{2j-1} I)^{-1}`.
///
/// The QR stage uses the inverse-free form through the stacked QR; the
/// Cholesky stage factors the shifted Gram matrix and falls back to the QR
/// form if that factorization fails. Returns the term and whether the
/// fallback was taken.
pub(crate) fn zolo_term(
    x: &DenseMatrix,
    x_gram: Option<&DenseMatrix>,
    p: &ZolotarevParams,
    j: usize,
    stage: Branch,
    opts: &PolarOptions,
) -> Result<(DenseMatrix, bool)> {
    let c = p.odd(j);
    let qr_term = || -> Result<DenseMatrix> {
        let qr = stacked_qr(x, c, opts.nb, opts.kernel)?;
        let mut t = qr.q1_q2t();
        t.scale_in_place(p.a[j] / c.sqrt());
        Ok(t)
    };
    match stage {
        Branch::Qr => Ok((qr_term()?, false)),
        Branch::Cholesky => {
            let mut z = match x_gram {
                Some(g) => g.clone(),
                None => gram(x),
            };
            for i in 0..z.rows() {
                z[(i, i)] += c;
            }
            match cholesky(&z) {
                Ok(l) => {
                    let mut t = solve_right_cholesky(x, &l)?;
                    t.scale_in_place(p.a[j]);
                    Ok((t, false))
                }
                Err(Error::NotPositiveDefinite { .. }) => Ok((qr_term()?, true)),
                Err(e) => Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::zolotarev_coeffs;
    use crate::linalg::orthogonality_defect;
    use crate::linalg::testutil::{gaussian, random_orthogonal};

    #[test]
    fn qdwh_weights_at_one_are_the_halley_fixed_point() {
        let (a, b, c) = qdwh_weights(1.0);
        assert!((a - 3.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15 && (c - 3.0).abs() < 1e-15);
    }

    #[test]
    fn convergence_threshold_examples() {
        let x = DenseMatrix::identity(3);
        assert!(check_convergence(&x, &x, 3, 1e-15).unwrap());
        let t = convergence_threshold(3, 1e-15);
        assert!((t - 7.196_856_730_011_52e-3).abs() < 1e-15);
        assert!(1e-5 <= t && 1e-2 > t);
    }

    #[test]
    fn check_convergence_shape_mismatch() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::identity(3);
        assert!(check_convergence(&a, &b, 1, 1e-15).is_err());
    }

    #[test]
    fn assemble_h_examples() {
        let a = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(assemble_h(&DenseMatrix::identity(2), &a).unwrap(), a);
        let d = DenseMatrix::from_diag(&[2.0, 3.0]);
        assert_eq!(assemble_h(&DenseMatrix::identity(2), &d).unwrap(), d);
    }

    #[test]
    fn qdwh_orthogonal_input_is_a_fixed_point() {
        let q = random_orthogonal(30, 1);
        let res = qdwh_pd(&q, 1.0, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(res.iters, 1);
        assert!(res.q_p.max_abs_diff(&q) < 1e-14);
        assert!(res.h.max_abs_diff(&DenseMatrix::identity(30)) < 1e-14);
    }

    #[test]
    fn qdwh_positive_diagonal_is_its_own_hermitian_factor() {
        let a = DenseMatrix::from_diag(&[1.0, 1e-3]);
        let res = qdwh_pd(&a, 1.0, 1e-3, DEFAULT_TOL).unwrap();
        assert!(res.q_p.max_abs_diff(&DenseMatrix::identity(2)) < 1e-13);
        assert!(res.h.max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn zolo_identity_takes_the_skip_branch() {
        let res = zolo_pd(&DenseMatrix::identity(8), 1.0, 1.0, 2, DEFAULT_TOL).unwrap();
        assert_eq!(res.iters, 1);
        assert_eq!(res.log[0].branch, Branch::Cholesky);
        assert!(res.q_p.max_abs_diff(&DenseMatrix::identity(8)) < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let a = DenseMatrix::identity(3);
        assert!(matches!(qdwh_pd(&a, 0.0, 1.0, 1e-15), Err(Error::Domain(_))));
        assert!(matches!(qdwh_pd(&a, 1.0, -1.0, 1e-15), Err(Error::Domain(_))));
        assert!(matches!(zolo_pd(&a, 1.0, 1.0, 9, 1e-15), Err(Error::UnsupportedOrder(9))));
        let wide = DenseMatrix::zeros(2, 3);
        assert!(matches!(zolo_pd(&wide, 1.0, 1.0, 2, 1e-15), Err(Error::Shape(_))));
    }

    #[test]
    fn random_rectangular_polar_invariants() {
        let a = gaussian(100, 60, 13);
        let b = crate::linalg::estimate_bounds(&a).unwrap();
        for res in [
            qdwh_pd(&a, b.alpha, b.beta, DEFAULT_TOL).unwrap(),
            zolo_pd(&a, b.alpha, b.beta, 3, DEFAULT_TOL).unwrap(),
        ] {
            assert!(orthogonality_defect(&res.q_p) <= 1e-14);
            let back = crate::linalg::matmul(&res.q_p, &res.h).unwrap();
            assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-13 * a.frobenius_norm());
            let eig = crate::linalg::sym_eig(&res.h).unwrap();
            let hn = eig.values.last().unwrap().abs();
            assert!(eig.values[0] >= -1e-13 * hn);
            assert!(res.log.iter().all(|r| r.ell_after >= r.ell_before && r.step_delta >= 0.0));
        }
    }

    #[test]
    fn qdwh_qr_and_cholesky_steps_agree() {
        let x0 = gaussian(40, 25, 2);
        let x = x0.scaled(1.0 / x0.frobenius_norm());
        let (a, b, c) = qdwh_weights(0.3);
        assert!(c <= 100.0);
        let opts = PolarOptions::default();
        let q = qdwh_qr_step(&x, a, b, c, &opts).unwrap();
        let ch = qdwh_cholesky_step(&x, a, b, c).unwrap();
        assert!(q.sub(&ch).unwrap().frobenius_norm() <= 1e-12 * q.frobenius_norm());
    }

    #[test]
    fn zolo_qr_term_matches_explicit_inverse() {
        // One term in QR form against X (X^T X + c I)^{-1} formed through
        // an explicit LU inverse of the shifted Gram matrix.
        let n = 30;
        let mut sig: Vec<f64> = (0..n).map(|i| 10f64.powf(-3.0 * i as f64 / (n - 1) as f64)).collect();
        sig.reverse();
        let u = random_orthogonal(n, 5);
        let v = random_orthogonal(n, 6);
        let mut us = u.clone();
        for j in 0..n {
            us.col_mut(j).iter_mut().for_each(|e| *e *= sig[j]);
        }
        let x = matmul_op(&us, Op::NoTrans, &v, Op::Trans).unwrap();
        let p = zolotarev_coeffs(3, 1e-3).unwrap();
        let opts = PolarOptions::default();
        for j in 0..3 {
            let (t_qr, _) = zolo_term(&x, None, &p, j, Branch::Qr, &opts).unwrap();
            let mut z = gram(&x);
            for i in 0..n {
                z[(i, i)] += p.odd(j);
            }
            let lu = crate::linalg::bounds::Lu::factor(&z).unwrap();
            let mut zinv = DenseMatrix::zeros(n, n);
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                zinv.col_mut(c).copy_from_slice(&lu.solve(&e));
            }
            let mut t_inv = crate::linalg::matmul(&x, &zinv).unwrap();
            t_inv.scale_in_place(p.a[j]);
            let rel = t_qr.sub(&t_inv).unwrap().frobenius_norm() / t_inv.frobenius_norm();
            // The oracle inverts a Gram matrix with condition up to 1e6.
            assert!(rel <= 1e-10, "term {j}: {rel:e}");
        }
    }
}
