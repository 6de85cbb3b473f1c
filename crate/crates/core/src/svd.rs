//! SVD through the polar decomposition: `A = Q_p H`, `H = V S V^T`,
//! `U = Q_p V`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::{choose_r, RPolicy, MAX_ORDER};
use crate::error::{Error, Result};
use crate::linalg::{
    estimate_bounds, matmul, matmul_op, orthogonality_defect, sym_eig, two_norm_estimate, Bounds,
    DenseMatrix, Op, StackedQrKernel, DEFAULT_NB,
};
use crate::parallel::{plan_groups, ExecutionPlan};
use crate::polar::{
    qdwh_pd_with, zolo_pd_with, IterationRecord, PolarOptions, PolarResult, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zolo,
    Qdwh,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Zolo => "zolo",
            Method::Qdwh => "qdwh",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "zolo" => Ok(Method::Zolo),
            "qdwh" => Ok(Method::Qdwh),
            _ => Err(Error::domain(format!("unknown method {s:?} (expected zolo or qdwh)"))),
        }
    }
}

/// Where `alpha` and `beta` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Estimated,
    /// Known from a synthetic construction.
    Exact,
    Override,
}

impl BoundSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundSource::Estimated => "estimated",
            BoundSource::Exact => "exact",
            BoundSource::Override => "override",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvdOptions {
    pub method: Method,
    pub r_policy: RPolicy,
    pub r_max: usize,
    pub tol: f64,
    /// Skips `estimate_bounds` when set.
    pub bounds: Option<Bounds>,
    pub nb: usize,
    pub kernel: StackedQrKernel,
    /// Worker budget for the Zolotarev groups; `None` uses the default.
    pub workers: Option<usize>,
    /// Run the Zolotarev terms in a plain loop instead of worker groups.
    pub serial: bool,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            method: Method::Zolo,
            r_policy: RPolicy::Table,
            r_max: MAX_ORDER,
            tol: DEFAULT_TOL,
            bounds: None,
            nb: DEFAULT_NB,
            kernel: StackedQrKernel::Structured,
            workers: None,
            serial: false,
        }
    }
}

impl SvdOptions {
    pub fn new(method: Method) -> Self {
        SvdOptions {
            method,
            ..Default::default()
        }
    }
}

/// Backward error and orthogonality defects of a computed SVD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdMetrics {
    /// `||A - U S V^T||_F / ||A||_2`.
    pub res: f64,
    /// `||I - U^T U||_F / n`.
    pub orth_l: f64,
    /// `||I - V^T V||_F / n`.
    pub orth_r: f64,
}

/// Seconds spent in each stage of [`polar_svd`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub bounds: f64,
    pub polar: f64,
    pub eig: f64,
    pub assemble: f64,
}

#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    /// Descending, nonnegative.
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub metrics: SvdMetrics,
    pub method: Method,
    pub pd_iters: usize,
    /// Zolotarev order, `None` for QDWH.
    pub r: Option<usize>,
    pub bounds: Bounds,
    pub bound_source: BoundSource,
    /// Smallest eigenvalue of `H` before clamping at zero.
    pub min_eigenvalue: f64,
    pub log: Vec<IterationRecord>,
    pub times: StageTimes,
}

pub fn metrics(
    a: &DenseMatrix,
    u: &DenseMatrix,
    sigma: &[f64],
    v: &DenseMatrix,
) -> Result<SvdMetrics> {
    let k = sigma.len();
    if u.rows() != a.rows() || v.rows() != a.cols() || u.cols() != k || v.cols() != k {
        return Err(Error::shape(format!(
            "metrics: A {:?}, U {:?}, sigma {k}, V {:?}",
            a.shape(),
            u.shape(),
            v.shape()
        )));
    }
    let mut us = u.clone();
    for (j, &s) in sigma.iter().enumerate() {
        us.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    let recon = matmul_op(&us, Op::NoTrans, v, Op::Trans)?;
    let norm2 = two_norm_estimate(a);
    let err = a.sub(&recon)?.frobenius_norm();
    let res = if norm2 == 0.0 { err } else { err / norm2 };
    Ok(SvdMetrics {
        res,
        orth_l: orthogonality_defect(u),
        orth_r: orthogonality_defect(v),
    })
}

pub fn polar_svd(a: &DenseMatrix, opts: &SvdOptions) -> Result<SvdResult> {
    if a.rows() < a.cols() {
        let mut out = polar_svd(&a.transpose(), opts)?;
        std::mem::swap(&mut out.u, &mut out.v);
        out.metrics = metrics(a, &out.u, &out.sigma, &out.v)?;
        return Ok(out);
    }
    let mut times = StageTimes::default();
    let t0 = Instant::now();
    let (bounds, bound_source) = match opts.bounds {
        Some(b) => (b, BoundSource::Override),
        None => (estimate_bounds(a)?, BoundSource::Estimated),
    };
    times.bounds = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let (pd, r) = polar_factor(a, bounds, opts)?;
    times.polar = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let eig = sym_eig(&pd.h)?;
    times.eig = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let n = eig.values.len();
    let min_eigenvalue = eig.values.first().copied().unwrap_or(0.0);
    // Descending order; the stable sort keeps ties in eigen-order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.values[j].total_cmp(&eig.values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| eig.values[i].max(0.0)).collect();
    let mut v = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        v.col_mut(dst).copy_from_slice(eig.vectors.col(src));
    }
    let u = matmul(&pd.q_p, &v)?;
    let m = metrics(a, &u, &sigma, &v)?;
    times.assemble = t0.elapsed().as_secs_f64();

    Ok(SvdResult {
        u,
        sigma,
        v,
        metrics: m,
        method: opts.method,
        pd_iters: pd.iters,
        r,
        bounds,
        bound_source,
        min_eigenvalue,
        log: pd.log,
        times,
    })
}

/// The polar stage of [`polar_svd`] for a tall `a` with known bounds.
/// Returns the decomposition and the Zolotarev order used.
pub fn polar_factor(
    a: &DenseMatrix,
    bounds: Bounds,
    opts: &SvdOptions,
) -> Result<(PolarResult, Option<usize>)> {
    let mut popts = PolarOptions {
        tol: opts.tol,
        nb: opts.nb,
        kernel: opts.kernel,
        plan: None,
    };
    match opts.method {
        Method::Qdwh => Ok((qdwh_pd_with(a, bounds.alpha, bounds.beta, &popts)?, None)),
        Method::Zolo => {
            let r = choose_r(bounds.kappa().max(1.0), opts.r_max, opts.r_policy)?.r;
            if !opts.serial {
                popts.plan = Some(match opts.workers {
                    Some(w) => plan_groups(w, r)?,
                    None => ExecutionPlan::for_order(r)?,
                });
            }
            Ok((zolo_pd_with(a, bounds.alpha, bounds.beta, r, &popts)?, Some(r)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_orthogonal;

    fn exact_bounds(sig: &[f64]) -> Option<Bounds> {
        let hi = sig.iter().cloned().fold(0.0, f64::max);
        let lo = sig.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(Bounds { alpha: hi, beta: lo })
    }

    #[test]
    fn diagonal_input() {
        let a = DenseMatrix::from_diag(&[5.0, 2.0, 1.0]);
        for method in [Method::Zolo, Method::Qdwh] {
            let out = polar_svd(&a, &SvdOptions::new(method)).unwrap();
            for (s, w) in out.sigma.iter().zip([5.0, 2.0, 1.0]) {
                assert!((s - w).abs() < 1e-13);
            }
            for j in 0..3 {
                assert!((out.u[(j, j)].abs() - 1.0).abs() < 1e-13);
                assert!((out.v[(j, j)].abs() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn antidiagonal_two_by_two() {
        let a = DenseMatrix::from_row_major(2, 2, &[0.0, 2.0, 1.0, 0.0]).unwrap();
        let out = polar_svd(&a, &SvdOptions::new(Method::Qdwh)).unwrap();
        assert!((out.sigma[0] - 2.0).abs() < 1e-13 && (out.sigma[1] - 1.0).abs() < 1e-13);
        assert!(out.metrics.res < 1e-14);
    }

    #[test]
    fn wide_input_is_transposed() {
        let a = DenseMatrix::from_row_major(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 1.5]).unwrap();
        let out = polar_svd(&a, &SvdOptions::new(Method::Zolo)).unwrap();
        assert_eq!(out.u.shape(), (2, 2));
        assert_eq!(out.v.shape(), (3, 2));
        assert!((out.sigma[0] - 3.0).abs() < 1e-13 && (out.sigma[1] - 1.5).abs() < 1e-13);
        assert!(out.metrics.res < 1e-14);
    }

    #[test]
    fn metrics_of_exact_factors_vanish() {
        let a = DenseMatrix::from_diag(&[3.0, 1.0]);
        let i2 = DenseMatrix::identity(2);
        let m = metrics(&a, &i2, &[3.0, 1.0], &i2).unwrap();
        assert!(m.res < 1e-16 && m.orth_l < 1e-16 && m.orth_r < 1e-16);
    }

    #[test]
    fn metrics_see_a_known_perturbation() {
        let n = 5;
        let a = DenseMatrix::identity(n);
        let mut u = DenseMatrix::identity(n);
        u[(1, 2)] += 1e-8;
        let m = metrics(&a, &u, &[1.0; 5], &DenseMatrix::identity(n)).unwrap();
        // ||I - U^T U||_F has two off-diagonal entries of 1e-8.
        let want = 1e-8 * 2f64.sqrt() / n as f64;
        assert!((m.orth_l / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn metrics_shape_mismatch() {
        let a = DenseMatrix::identity(3);
        let u = DenseMatrix::identity(2);
        assert!(metrics(&a, &u, &[1.0, 1.0], &u).is_err());
    }

    #[test]
    fn dropped_singular_value_shows_in_residual() {
        let n = 100;
        let sig = crate::io::synthetic::log_spectrum(n, 1e3);
        let u = random_orthogonal(n, 1);
        let v = random_orthogonal(n, 2);
        let mut us = u.clone();
        for j in 0..n {
            us.col_mut(j).iter_mut().for_each(|x| *x *= sig[j]);
        }
        let a = matmul_op(&us, Op::NoTrans, &v, Op::Trans).unwrap();
        let mut trunc = sig.clone();
        trunc[n - 1] = 0.0;
        let m = metrics(&a, &u, &trunc, &v).unwrap();
        assert!((m.res / 1e-3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn methods_agree_on_constructed_matrix() {
        let n = 120;
        let sig = crate::io::synthetic::log_spectrum(n, 1e5);
        let a = crate::io::synthetic::gen_synthetic(n, 1e5, 3).unwrap();
        let mut outs = Vec::new();
        for method in [Method::Zolo, Method::Qdwh] {
            let opts = SvdOptions {
                method,
                bounds: exact_bounds(&sig),
                ..Default::default()
            };
            let out = polar_svd(&a, &opts).unwrap();
            assert!(out.metrics.res <= 1e-13, "{:?}", out.metrics);
            assert!(out.metrics.orth_l <= 1e-14 && out.metrics.orth_r <= 1e-14);
            for (s, w) in out.sigma.iter().zip(&sig) {
                assert!(((s - w) / w).abs() <= 1e-10);
            }
            outs.push(out);
        }
        for (x, y) in outs[0].sigma.iter().zip(&outs[1].sigma) {
            assert!(((x - y) / y).abs() <= 1e-10);
        }
    }
}
