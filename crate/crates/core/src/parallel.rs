//! Concurrent evaluation of the independent Zolotarev terms.
//!
//! A pass computes `M (X + sum_j T_j)`. Each `T_j` is produced by its own
//! worker group into a private buffer; the combiner then adds the buffers in
//! `reduction_order`, so the result does not depend on which group finishes
//! first and is bitwise equal to the serial loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::ZolotarevParams;
use crate::error::{Error, Result};
use crate::linalg::blas::record;
use crate::linalg::{count_flops, gram, DenseMatrix};
use crate::polar::{zolo_term, Branch, PolarOptions};

/// Environment variable overriding the worker budget.
pub const WORKERS_ENV: &str = "POLAR_SVD_WORKERS";

/// Partition of a worker budget into `r` groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub total_workers: usize,
    pub r: usize,
    pub group_sizes: Vec<usize>,
    /// Zero-based permutation of `0..r`; terms are summed in this order.
    pub reduction_order: Vec<usize>,
}

impl ExecutionPlan {
    /// Plan for `r` groups using the default worker budget, raised to `r`
    /// when fewer workers are available.
    pub fn for_order(r: usize) -> Result<ExecutionPlan> {
        plan_groups(default_workers()?.max(r), r)
    }

    /// Replaces the reduction order; `order` must be a permutation of `0..r`.
    pub fn with_reduction_order(mut self, order: Vec<usize>) -> Result<ExecutionPlan> {
        let mut seen = vec![false; self.r];
        let ok = order.len() == self.r
            && order.iter().all(|&j| j < self.r && !std::mem::replace(&mut seen[j], true));
        if !ok {
            return Err(Error::domain(format!(
                "reduction order {order:?} is not a permutation of 0..{}",
                self.r
            )));
        }
        self.reduction_order = order;
        Ok(self)
    }
}

/// Near-equal split of `total_workers` into `r` groups, larger groups first.
pub fn plan_groups(total_workers: usize, r: usize) -> Result<ExecutionPlan> {
    if r == 0 || total_workers < r {
        return Err(Error::InfeasiblePlan {
            workers: total_workers,
            groups: r,
        });
    }
    let base = total_workers / r;
    let rem = total_workers % r;
    let group_sizes = (0..r).map(|j| base + usize::from(j < rem)).collect();
    Ok(ExecutionPlan {
        total_workers,
        r,
        group_sizes,
        reduction_order: (0..r).collect(),
    })
}

/// Worker budget from `POLAR_SVD_WORKERS`, else the logical core count.
pub fn default_workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::domain(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Result of one pass with its timing breakdown.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub x: DenseMatrix,
    pub fallbacks: usize,
    pub term_seconds: Vec<f64>,
    pub combine_seconds: f64,
}

/// One Zolotarev pass over worker groups with default kernel settings.
pub fn parallel_zolo_pass(
    x: &DenseMatrix,
    p: &ZolotarevParams,
    plan: &ExecutionPlan,
    stage: Branch,
) -> Result<DenseMatrix> {
    let opts = PolarOptions {
        plan: Some(plan.clone()),
        ..Default::default()
    };
    Ok(run_zolo_pass(x, p, stage, &opts)?.x)
}

/// The same pass as a plain loop over the terms, for reference.
pub fn serial_zolo_pass(
    x: &DenseMatrix,
    p: &ZolotarevParams,
    stage: Branch,
    opts: &PolarOptions,
) -> Result<DenseMatrix> {
    let opts = PolarOptions {
        plan: None,
        ..opts.clone()
    };
    Ok(run_zolo_pass(x, p, stage, &opts)?.x)
}

/// Runs a pass serially or over `opts.plan`.
pub fn run_zolo_pass(
    x: &DenseMatrix,
    p: &ZolotarevParams,
    stage: Branch,
    opts: &PolarOptions,
) -> Result<PassOutput> {
    if !x.is_finite() {
        return Err(Error::domain("iterate has non-finite entries"));
    }
    let r = p.r;
    let order: Vec<usize> = match &opts.plan {
        Some(plan) => {
            if plan.r != r {
                return Err(Error::InfeasiblePlan {
                    workers: plan.total_workers,
                    groups: r,
                });
            }
            plan.reduction_order.clone()
        }
        None => (0..r).collect(),
    };
    // The Gram matrix is shared read-only by every Cholesky-stage term.
    let x_gram = match stage {
        Branch::Cholesky => Some(gram(x)),
        Branch::Qr => None,
    };
    let term = |j: usize| -> Result<(DenseMatrix, bool, f64)> {
        let t0 = Instant::now();
        let (t, fb) = zolo_term(x, x_gram.as_ref(), p, j, stage, opts).map_err(|e| Error::Term {
            group: j,
            source: Box::new(e),
        })?;
        Ok((t, fb, t0.elapsed().as_secs_f64()))
    };

    let results: Vec<Result<(DenseMatrix, bool, f64)>> = if opts.plan.is_some() && r > 1 {
        let joined: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..r)
                .map(|j| s.spawn(move || count_flops(|| term(j))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("term worker panicked"))
                .collect()
        });
        // Flops counted on the workers are credited to the calling thread.
        joined
            .into_iter()
            .map(|(res, fc)| {
                record(fc.mults, fc.adds);
                res
            })
            .collect()
    } else {
        (0..r).map(term).collect()
    };
    let mut terms = Vec::with_capacity(r);
    for res in results {
        terms.push(res?);
    }

    let t0 = Instant::now();
    let mut acc = x.clone();
    for &j in &order {
        acc.axpy(1.0, &terms[j].0)?;
    }
    acc.scale_in_place(p.m_hat);
    Ok(PassOutput {
        x: acc,
        fallbacks: terms.iter().filter(|t| t.1).count(),
        term_seconds: terms.iter().map(|t| t.2).collect(),
        combine_seconds: t0.elapsed().as_secs_f64(),
    })
}
