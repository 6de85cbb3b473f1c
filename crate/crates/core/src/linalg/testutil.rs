use super::matrix::DenseMatrix;
use super::qr::householder_qr;

pub(crate) fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    crate::io::synthetic::gaussian_matrix(m, n, seed)
}

pub(crate) fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    householder_qr(&gaussian(n, n, seed)).unwrap().0
}
