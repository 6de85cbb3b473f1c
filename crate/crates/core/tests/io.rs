use std::io::Write;

use zolo_svd::io::synthetic::{gaussian_matrix, gen_synthetic};
use zolo_svd::io::{read_matrix_market, MatrixSource};
use zolo_svd::linalg::{gram, sym_eig, DenseMatrix};
use zolo_svd::Error;

fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".mtx").tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn reads_coordinate_file_from_disk() {
    let f = write_tmp("%%MatrixMarket matrix coordinate real general\n% two entries\n2 2 2\n1 1 3.0\n2 2 1.0\n");
    assert_eq!(read_matrix_market(f.path()).unwrap(), DenseMatrix::from_diag(&[3.0, 1.0]));
    let src = MatrixSource::MatrixMarketFile { path: f.path().to_path_buf() };
    assert_eq!(src.load().unwrap(), DenseMatrix::from_diag(&[3.0, 1.0]));
}

#[test]
fn complex_banner_is_a_parse_error() {
    let f = write_tmp("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 2.0\n");
    assert!(matches!(read_matrix_market(f.path()), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(read_matrix_market("/definitely/not/here.mtx"), Err(Error::Io(_))));
}

#[test]
fn two_by_two_with_unit_kappa_is_orthogonal() {
    let a = gen_synthetic(2, 1.0, 3).unwrap();
    let g = gram(&a);
    assert!(g.sub(&DenseMatrix::identity(2)).unwrap().frobenius_norm() < 1e-15);
}

#[test]
fn synthetic_condition_number_within_one_percent() {
    // Oracle: eigenvalues of A^T A; squaring 1e4 stays well inside f64.
    let a = gen_synthetic(100, 1e4, 7).unwrap();
    let e = sym_eig(&gram(&a)).unwrap().values;
    let kappa = (e[99] / e[0]).sqrt();
    assert!((0.99e4..=1.01e4).contains(&kappa), "kappa = {kappa}");
}

#[test]
fn synthetic_generation_is_deterministic() {
    let a = gen_synthetic(50, 1e3, 99).unwrap();
    let b = gen_synthetic(50, 1e3, 99).unwrap();
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, gen_synthetic(50, 1e3, 98).unwrap());
    assert_eq!(gaussian_matrix(4, 3, 1), gaussian_matrix(4, 3, 1));
}

#[test]
fn synthetic_rejects_bad_parameters() {
    assert!(matches!(gen_synthetic(10, 0.5, 0), Err(Error::Domain(_))));
    assert!(gen_synthetic(1, 2.0, 0).is_err());
    assert!(gen_synthetic(10, f64::INFINITY, 0).is_err());
}
