pub mod matrix_market;
pub mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub use matrix_market::{parse_matrix_market, read_matrix_market};
pub use synthetic::gen_synthetic;

/// Where a test matrix comes from. Every source is loaded densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSource {
    MatrixMarketFile { path: PathBuf },
    /// Gaussian orthogonal factors around a log-spaced spectrum.
    Synthetic { n: usize, kappa: f64, seed: u64 },
}

impl MatrixSource {
    pub fn synthetic(n: usize, kappa: f64, seed: u64) -> Result<MatrixSource> {
        if n < 2 || !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::domain(format!(
                "synthetic source needs n >= 2 and kappa >= 1, got n={n}, kappa={kappa}"
            )));
        }
        Ok(MatrixSource::Synthetic { n, kappa, seed })
    }

    /// Parses `n,kappa,seed`.
    pub fn parse_synthetic(spec: &str) -> Result<MatrixSource> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let bad = || Error::domain(format!("expected n,kappa,seed, got {spec:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let kappa = parts[1].parse().map_err(|_| bad())?;
        let seed = parts[2].parse().map_err(|_| bad())?;
        MatrixSource::synthetic(n, kappa, seed)
    }

    pub fn load(&self) -> Result<DenseMatrix> {
        match self {
            MatrixSource::MatrixMarketFile { path } => read_matrix_market(path),
            MatrixSource::Synthetic { n, kappa, seed } => gen_synthetic(*n, *kappa, *seed),
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            MatrixSource::MatrixMarketFile { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            MatrixSource::Synthetic { n, kappa, seed } => format!("synthetic-{n}-{kappa:e}-{seed}"),
        }
    }

    /// Nominal condition number, known only for synthetic sources.
    pub fn nominal_kappa(&self) -> Option<f64> {
        match self {
            MatrixSource::Synthetic { kappa, .. } => Some(*kappa),
            MatrixSource::MatrixMarketFile { .. } => None,
        }
    }

    /// Always true: sparse inputs are stored densely.
    pub fn densified(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_spec_round_trip() {
        let s = MatrixSource::parse_synthetic("200, 9.06e3, 1").unwrap();
        assert_eq!(s, MatrixSource::Synthetic { n: 200, kappa: 9.06e3, seed: 1 });
        assert_eq!(s.id(), "synthetic-200-9.06e3-1");
        assert!(MatrixSource::parse_synthetic("1,10,0").is_err());
        assert!(MatrixSource::parse_synthetic("10,0.5,0").is_err());
        assert!(MatrixSource::parse_synthetic("10,5").is_err());
    }

    #[test]
    fn file_source_id_is_the_stem() {
        let s = MatrixSource::MatrixMarketFile { path: "/data/bcsstk18.mtx".into() };
        assert_eq!(s.id(), "bcsstk18");
    }
}
