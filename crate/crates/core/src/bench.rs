//! Benchmark drivers and their CSV/JSON reports.
//!
//! Timing columns always come last and can be dropped, so two identical
//! runs produce byte-identical reports.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::elliptic::{predict_iterations, RPolicy};
use crate::error::{Error, Result};
use crate::io::MatrixSource;
use crate::linalg::{
    count_flops, estimate_bounds, matmul, orthogonality_defect, stacked_qr_dense, structured_qr,
    Bounds, DenseMatrix, FlopCounter,
};
use crate::polar::{Branch, IterationRecord, PolarResult};
use crate::svd::{polar_factor, polar_svd, BoundSource, Method, SvdOptions, SvdResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::domain(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

/// A report row with fixed columns and optional trailing timing columns.
pub trait Record: Serialize + Clone {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
    fn timing_header() -> Vec<&'static str>;
    /// Empty when timings were stripped.
    fn timing_fields(&self) -> Vec<String>;
    fn strip_timings(&mut self);
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport<T> {
    pub schema_version: u32,
    pub command: String,
    pub records: Vec<T>,
}

impl<T: Record> BenchReport<T> {
    pub fn new(command: impl Into<String>, records: Vec<T>) -> Self {
        BenchReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            records,
        }
    }

    pub fn without_timings(mut self) -> Self {
        self.records.iter_mut().for_each(Record::strip_timings);
        self
    }

    pub fn write(&self, format: ReportFormat, w: impl Write) -> Result<()> {
        match format {
            ReportFormat::Csv => self.write_csv(w),
            ReportFormat::Json => self.write_json(w),
        }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let timings = self.records.iter().any(|r| !r.timing_fields().is_empty());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["schema_version"];
        header.extend(T::header());
        if timings {
            header.extend(T::timing_header());
        }
        out.write_record(&header).map_err(csv_err)?;
        for rec in &self.records {
            let mut row = vec![SCHEMA_VERSION.to_string()];
            row.extend(rec.fields());
            if timings {
                let t = rec.timing_fields();
                if t.is_empty() {
                    row.extend(T::timing_header().iter().map(|_| String::new()));
                } else {
                    row.extend(t);
                }
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Report(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Report(format!("{other:?}")),
    }
}

/// Shortest round-trip scientific notation.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// How `alpha` and `beta` are obtained for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMode {
    /// [`BoundMode::default_for`] the source.
    Auto,
    Estimated,
    /// `alpha = 1`, `beta = 1/kappa`; synthetic sources only.
    Exact,
    Override(Bounds),
}

impl BoundMode {
    /// Exact for synthetic sources, estimated otherwise.
    pub fn default_for(source: &MatrixSource) -> BoundMode {
        match source {
            MatrixSource::Synthetic { .. } => BoundMode::Exact,
            MatrixSource::MatrixMarketFile { .. } => BoundMode::Estimated,
        }
    }

    pub fn resolve(&self, source: &MatrixSource, a: &DenseMatrix) -> Result<(Bounds, BoundSource)> {
        match *self {
            BoundMode::Auto => BoundMode::default_for(source).resolve(source, a),
            BoundMode::Estimated => Ok((estimate_bounds(&tall(a))?, BoundSource::Estimated)),
            BoundMode::Override(b) => Ok((b, BoundSource::Override)),
            BoundMode::Exact => match source.nominal_kappa() {
                Some(kappa) => Ok((
                    Bounds {
                        alpha: 1.0,
                        beta: 1.0 / kappa,
                    },
                    BoundSource::Exact,
                )),
                None => Err(Error::domain("exact bounds need a synthetic source")),
            },
        }
    }
}

fn tall(a: &DenseMatrix) -> DenseMatrix {
    if a.rows() < a.cols() {
        a.transpose()
    } else {
        a.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdTimings {
    pub seconds_bounds: f64,
    pub seconds_polar: f64,
}

/// One polar decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct PdRecord {
    pub matrix_id: String,
    pub m: usize,
    pub n: usize,
    pub method: Method,
    pub r: Option<usize>,
    pub iters: usize,
    pub bound_source: BoundSource,
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub flops_mults: u64,
    pub flops_adds: u64,
    /// `||A - Q_p H||_F / ||A||_F`.
    pub res: f64,
    pub orth: f64,
    /// `||H - H^T||_F / ||H||_F`.
    pub h_asymmetry: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<PdTimings>,
}

impl Record for PdRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "matrix_id", "m", "n", "method", "r", "iters", "bound_source", "alpha", "beta", "tol",
            "flops_mults", "flops_adds", "res", "orth", "h_asymmetry",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.matrix_id.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.method.as_str().into(),
            opt(self.r),
            self.iters.to_string(),
            self.bound_source.as_str().into(),
            num(self.alpha),
            num(self.beta),
            num(self.tol),
            self.flops_mults.to_string(),
            self.flops_adds.to_string(),
            num(self.res),
            num(self.orth),
            num(self.h_asymmetry),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        vec!["seconds_bounds", "seconds_polar"]
    }

    fn timing_fields(&self) -> Vec<String> {
        self.timings
            .map(|t| vec![num(t.seconds_bounds), num(t.seconds_polar)])
            .unwrap_or_default()
    }

    fn strip_timings(&mut self) {
        self.timings = None;
    }
}

/// Runs one polar decomposition with the order chosen by `opts.r_policy`.
pub fn run_pd(
    source: &MatrixSource,
    a: &DenseMatrix,
    mode: BoundMode,
    opts: &SvdOptions,
) -> Result<(PdRecord, PolarResult)> {
    let a = tall(a);
    let t0 = Instant::now();
    let (bounds, bound_source) = mode.resolve(source, &a)?;
    let seconds_bounds = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let (res, fc) = count_flops(|| polar_factor(&a, bounds, opts));
    let (pd, r) = res?;
    let seconds_polar = t0.elapsed().as_secs_f64();
    let qh = matmul(&pd.q_p, &pd.h)?;
    let h_norm = pd.h.frobenius_norm();
    let rec = PdRecord {
        matrix_id: source.id(),
        m: a.rows(),
        n: a.cols(),
        method: opts.method,
        r,
        iters: pd.iters,
        bound_source,
        alpha: bounds.alpha,
        beta: bounds.beta,
        tol: opts.tol,
        flops_mults: fc.mults,
        flops_adds: fc.adds,
        res: a.sub(&qh)?.frobenius_norm() / a.frobenius_norm(),
        orth: orthogonality_defect(&pd.q_p),
        h_asymmetry: if h_norm > 0.0 { pd.h.asymmetry() / h_norm } else { 0.0 },
        timings: Some(PdTimings {
            seconds_bounds,
            seconds_polar,
        }),
    };
    Ok((rec, pd))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvdTimings {
    pub seconds_bounds: f64,
    pub seconds_polar: f64,
    pub seconds_eig: f64,
    pub seconds_assemble: f64,
}

/// One SVD with its accuracy metrics.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRecord {
    pub matrix_id: String,
    pub m: usize,
    pub n: usize,
    pub kappa_nominal: Option<f64>,
    /// `alpha / beta`.
    pub kappa_estimate: f64,
    pub method: Method,
    pub r: Option<usize>,
    pub pd_iters: usize,
    pub bound_source: BoundSource,
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub flops_mults: u64,
    pub flops_adds: u64,
    pub res: f64,
    pub orth_l: f64,
    pub orth_r: f64,
    pub min_eigenvalue: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<SvdTimings>,
}

impl AccuracyRecord {
    pub fn from_result(source: &MatrixSource, a: &DenseMatrix, out: &SvdResult, tol: f64, fc: FlopCounter) -> Self {
        AccuracyRecord {
            matrix_id: source.id(),
            m: a.rows(),
            n: a.cols(),
            kappa_nominal: source.nominal_kappa(),
            kappa_estimate: out.bounds.kappa(),
            method: out.method,
            r: out.r,
            pd_iters: out.pd_iters,
            bound_source: out.bound_source,
            alpha: out.bounds.alpha,
            beta: out.bounds.beta,
            tol,
            flops_mults: fc.mults,
            flops_adds: fc.adds,
            res: out.metrics.res,
            orth_l: out.metrics.orth_l,
            orth_r: out.metrics.orth_r,
            min_eigenvalue: out.min_eigenvalue,
            sigma_max: out.sigma.first().copied().unwrap_or(0.0),
            sigma_min: out.sigma.last().copied().unwrap_or(0.0),
            timings: Some(SvdTimings {
                seconds_bounds: out.times.bounds,
                seconds_polar: out.times.polar,
                seconds_eig: out.times.eig,
                seconds_assemble: out.times.assemble,
            }),
        }
    }
}

impl Record for AccuracyRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "matrix_id", "m", "n", "kappa_nominal", "kappa_estimate", "method", "r", "pd_iters",
            "bound_source", "alpha", "beta", "tol", "flops_mults", "flops_adds", "res", "orth_l",
            "orth_r", "min_eigenvalue", "sigma_max", "sigma_min",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.matrix_id.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.kappa_nominal.map(num).unwrap_or_default(),
            num(self.kappa_estimate),
            self.method.as_str().into(),
            opt(self.r),
            self.pd_iters.to_string(),
            self.bound_source.as_str().into(),
            num(self.alpha),
            num(self.beta),
            num(self.tol),
            self.flops_mults.to_string(),
            self.flops_adds.to_string(),
            num(self.res),
            num(self.orth_l),
            num(self.orth_r),
            num(self.min_eigenvalue),
            num(self.sigma_max),
            num(self.sigma_min),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        vec!["seconds_bounds", "seconds_polar", "seconds_eig", "seconds_assemble"]
    }

    fn timing_fields(&self) -> Vec<String> {
        self.timings
            .map(|t| {
                vec![
                    num(t.seconds_bounds),
                    num(t.seconds_polar),
                    num(t.seconds_eig),
                    num(t.seconds_assemble),
                ]
            })
            .unwrap_or_default()
    }

    fn strip_timings(&mut self) {
        self.timings = None;
    }
}

/// Full SVD of one source.
pub fn run_svd(
    source: &MatrixSource,
    a: &DenseMatrix,
    mode: BoundMode,
    opts: &SvdOptions,
) -> Result<(AccuracyRecord, SvdResult)> {
    let mut opts = opts.clone();
    let mut given = None;
    let mode = match mode {
        BoundMode::Auto => BoundMode::default_for(source),
        m => m,
    };
    if mode != BoundMode::Estimated {
        let (b, src) = mode.resolve(source, a)?;
        opts.bounds = Some(b);
        given = Some(src);
    }
    let (out, fc) = count_flops(|| polar_svd(a, &opts));
    let mut out = out?;
    if let Some(src) = given {
        out.bound_source = src;
    }
    Ok((AccuracyRecord::from_result(source, a, &out, opts.tol, fc), out))
}

/// SVD of every source with every method (the residual/orthogonality sweep).
pub fn bench_accuracy(
    sources: &[MatrixSource],
    methods: &[Method],
    mode: BoundMode,
    opts: &SvdOptions,
) -> Result<Vec<AccuracyRecord>> {
    let mut out = Vec::new();
    for source in sources {
        let a = source.load()?;
        for &method in methods {
            let o = SvdOptions { method, ..opts.clone() };
            out.push(run_svd(source, &a, mode, &o)?.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterTimings {
    pub seconds_total: f64,
}

/// Iteration count of one polar decomposition next to its prediction.
#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub matrix_id: String,
    pub n: usize,
    pub kappa: f64,
    pub method: Method,
    /// Zolotarev order; 1 for QDWH, whose step is the order-1 function.
    pub r: usize,
    pub predicted: usize,
    pub passes: usize,
    pub converged: bool,
    pub qr_passes: usize,
    pub cholesky_passes: usize,
    pub qr_fallbacks: usize,
    pub final_delta: f64,
    pub bound_source: BoundSource,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<IterTimings>,
}

impl Record for IterRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "matrix_id", "n", "kappa", "method", "r", "predicted", "passes", "converged",
            "qr_passes", "cholesky_passes", "qr_fallbacks", "final_delta", "bound_source",
            "alpha", "beta",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.matrix_id.clone(),
            self.n.to_string(),
            num(self.kappa),
            self.method.as_str().into(),
            self.r.to_string(),
            self.predicted.to_string(),
            self.passes.to_string(),
            self.converged.to_string(),
            self.qr_passes.to_string(),
            self.cholesky_passes.to_string(),
            self.qr_fallbacks.to_string(),
            num(self.final_delta),
            self.bound_source.as_str().into(),
            num(self.alpha),
            num(self.beta),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        vec!["seconds_total"]
    }

    fn timing_fields(&self) -> Vec<String> {
        self.timings.map(|t| vec![num(t.seconds_total)]).unwrap_or_default()
    }

    fn strip_timings(&mut self) {
        self.timings = None;
    }
}

/// A method and, for Zolo-PD, a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterConfig {
    pub method: Method,
    pub r: usize,
}

impl IterConfig {
    pub fn label(&self) -> String {
        match self.method {
            Method::Qdwh => "qdwh".into(),
            Method::Zolo => format!("zolo-r{}", self.r),
        }
    }
}

/// Iteration counts over sources and configurations. Non-convergence is a
/// data point here, not an error.
pub fn bench_iters(
    sources: &[MatrixSource],
    configs: &[IterConfig],
    mode: BoundMode,
    opts: &SvdOptions,
) -> Result<Vec<IterRecord>> {
    let mut out = Vec::new();
    for source in sources {
        let a = tall(&source.load()?);
        let (bounds, bound_source) = mode.resolve(source, &a)?;
        let kappa = source.nominal_kappa().unwrap_or_else(|| bounds.kappa());
        for cfg in configs {
            let o = SvdOptions {
                method: cfg.method,
                r_policy: RPolicy::Fixed(cfg.r),
                ..opts.clone()
            };
            let r = match cfg.method {
                Method::Qdwh => 1,
                Method::Zolo => cfg.r,
            };
            let t0 = Instant::now();
            let (log, converged) = match polar_factor(&a, bounds, &o) {
                Ok((pd, _)) => (pd.log, true),
                Err(Error::NonConvergence { log, .. }) => (log, false),
                Err(e) => return Err(e),
            };
            let count = |b: Branch| log.iter().filter(|rec| rec.branch == b).count();
            out.push(IterRecord {
                matrix_id: source.id(),
                n: a.cols(),
                kappa,
                method: cfg.method,
                r,
                predicted: predict_iterations(bounds.kappa().max(1.0), r)?,
                passes: log.len(),
                converged,
                qr_passes: count(Branch::Qr),
                cholesky_passes: count(Branch::Cholesky),
                qr_fallbacks: log.iter().map(|rec| rec.qr_fallbacks).sum(),
                final_delta: log.last().map_or(0.0, |rec| rec.step_delta),
                bound_source,
                alpha: bounds.alpha,
                beta: bounds.beta,
                timings: Some(IterTimings {
                    seconds_total: t0.elapsed().as_secs_f64(),
                }),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QrTimings {
    pub seconds_structured: f64,
    pub seconds_dense: f64,
}

/// Structured against dense QR of `[X; sqrt(c) I]`.
#[derive(Debug, Clone, Serialize)]
pub struct StructuredQrRecord {
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub nb: usize,
    pub structured_mults: u64,
    pub structured_adds: u64,
    pub dense_mults: u64,
    pub dense_adds: u64,
    /// `structured_mults / dense_mults`.
    pub mult_ratio: f64,
    /// `||S - D||_F` between the two `Q1 Q2^T` products.
    pub q1q2t_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<QrTimings>,
}

impl Record for StructuredQrRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "m", "n", "c", "nb", "structured_mults", "structured_adds", "dense_mults",
            "dense_adds", "mult_ratio", "q1q2t_diff",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.n.to_string(),
            num(self.c),
            self.nb.to_string(),
            self.structured_mults.to_string(),
            self.structured_adds.to_string(),
            self.dense_mults.to_string(),
            self.dense_adds.to_string(),
            num(self.mult_ratio),
            num(self.q1q2t_diff),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        vec!["seconds_structured", "seconds_dense"]
    }

    fn timing_fields(&self) -> Vec<String> {
        self.timings
            .map(|t| vec![num(t.seconds_structured), num(t.seconds_dense)])
            .unwrap_or_default()
    }

    fn strip_timings(&mut self) {
        self.timings = None;
    }
}

/// Compares both stacked-QR kernels on seeded Gaussian `m x n` inputs.
pub fn bench_structured_qr(
    shapes: &[(usize, usize)],
    shifts: &[f64],
    nb: usize,
    seed: u64,
) -> Result<Vec<StructuredQrRecord>> {
    let mut out = Vec::new();
    for (k, &(m, n)) in shapes.iter().enumerate() {
        let x = crate::io::synthetic::gaussian_matrix(m, n, seed.wrapping_add(k as u64));
        for &c in shifts {
            let t0 = Instant::now();
            let (s, fs) = count_flops(|| structured_qr(&x, c, nb));
            let s = s?;
            let seconds_structured = t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            let (d, fd) = count_flops(|| stacked_qr_dense(&x, c, nb));
            let d = d?;
            let seconds_dense = t0.elapsed().as_secs_f64();
            out.push(StructuredQrRecord {
                m,
                n,
                c,
                nb,
                structured_mults: fs.mults,
                structured_adds: fs.adds,
                dense_mults: fd.mults,
                dense_adds: fd.adds,
                mult_ratio: fs.mults as f64 / fd.mults as f64,
                q1q2t_diff: s.q1_q2t().sub(&d.q1_q2t())?.frobenius_norm(),
                timings: Some(QrTimings {
                    seconds_structured,
                    seconds_dense,
                }),
            });
        }
    }
    Ok(out)
}

/// Iteration log as a report, for runs that stop without converging.
impl Record for IterationRecord {
    fn header() -> Vec<&'static str> {
        vec!["index", "branch", "ell_before", "ell_after", "step_delta", "qr_fallbacks"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            self.branch.as_str().into(),
            num(self.ell_before),
            num(self.ell_after),
            num(self.step_delta),
            self.qr_fallbacks.to_string(),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        vec!["seconds"]
    }

    fn timing_fields(&self) -> Vec<String> {
        if self.seconds.is_nan() {
            Vec::new()
        } else {
            vec![num(self.seconds)]
        }
    }

    fn strip_timings(&mut self) {
        self.seconds = f64::NAN;
    }
}

/// One row of the order table: the prediction for each `r`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderRecord {
    pub kappa: f64,
    pub r: usize,
    pub predicted_iters: usize,
    pub chosen: bool,
}

impl Record for OrderRecord {
    fn header() -> Vec<&'static str> {
        vec!["kappa", "r", "predicted_iters", "chosen"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            num(self.kappa),
            self.r.to_string(),
            self.predicted_iters.to_string(),
            self.chosen.to_string(),
        ]
    }

    fn timing_header() -> Vec<&'static str> {
        Vec::new()
    }

    fn timing_fields(&self) -> Vec<String> {
        Vec::new()
    }

    fn strip_timings(&mut self) {}
}

/// Predictions for `r = 1..=r_max` (stopping at the chosen order under the
/// table policy).
pub fn order_table(kappa: f64, r_max: usize, policy: RPolicy) -> Result<Vec<OrderRecord>> {
    let choice = crate::elliptic::choose_r(kappa, r_max, policy)?;
    let last = match policy {
        RPolicy::Table => choice.r,
        RPolicy::Fixed(r) => r,
    };
    (1..=last)
        .map(|r| {
            Ok(OrderRecord {
                kappa,
                r,
                predicted_iters: predict_iterations(kappa, r)?,
                chosen: r == choice.r,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_string<T: Record>(rep: &BenchReport<T>, f: ReportFormat) -> String {
        let mut buf = Vec::new();
        rep.write(f, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn order_table_ends_at_the_chosen_order() {
        let rows = order_table(1e16, 8, RPolicy::Table).unwrap();
        let last = rows.last().unwrap();
        assert_eq!((last.r, last.predicted_iters, last.chosen), (8, 2, true));
        assert_eq!(rows.len(), 8);
        let fixed = order_table(1e16, 8, RPolicy::Fixed(3)).unwrap();
        assert_eq!(fixed.len(), 3);
    }

    #[test]
    fn csv_has_schema_version_and_trailing_timings() {
        let recs = bench_structured_qr(&[(12, 6)], &[1.0], 4, 0).unwrap();
        let rep = BenchReport::new("bench-structured-qr", recs);
        let csv = to_string(&rep, ReportFormat::Csv);
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("schema_version,m,n,"));
        assert!(header.ends_with("seconds_structured,seconds_dense"));
        let stripped = to_string(&rep.clone().without_timings(), ReportFormat::Csv);
        assert!(stripped.lines().next().unwrap().ends_with("q1q2t_diff"));
        assert!(!to_string(&rep.without_timings(), ReportFormat::Json).contains("seconds"));
    }

    #[test]
    fn stripped_reports_are_reproducible() {
        let src = MatrixSource::synthetic(30, 100.0, 5).unwrap();
        let run = || {
            let recs = bench_accuracy(
                std::slice::from_ref(&src),
                &[Method::Zolo, Method::Qdwh],
                BoundMode::Estimated,
                &SvdOptions::default(),
            )
            .unwrap();
            to_string(&BenchReport::new("bench-accuracy", recs).without_timings(), ReportFormat::Csv)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn exact_bounds_need_a_synthetic_source() {
        let src = MatrixSource::MatrixMarketFile { path: "x.mtx".into() };
        let a = DenseMatrix::identity(2);
        assert!(BoundMode::Exact.resolve(&src, &a).is_err());
    }

    #[test]
    fn iteration_counts_are_recorded() {
        let src = MatrixSource::synthetic(40, 1e3, 2).unwrap();
        let cfgs = [
            IterConfig { method: Method::Qdwh, r: 1 },
            IterConfig { method: Method::Zolo, r: 3 },
        ];
        let recs = bench_iters(&[src], &cfgs, BoundMode::Exact, &SvdOptions::default()).unwrap();
        assert_eq!(recs.len(), 2);
        for rec in &recs {
            assert!(rec.converged);
            assert_eq!(rec.passes, rec.qr_passes + rec.cholesky_passes);
            assert!(rec.passes >= rec.predicted);
        }
    }
}
