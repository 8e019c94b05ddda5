//! Shared helpers for unit tests: seeded system generators with controlled
//! spectra.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::solvers::LinearSystem;
use crate::spectral::{eig_sym, SpectralDecomposition};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, n).qr().q()
}

/// A random m×n system whose normal matrix has exactly the given eigenvalues:
/// `A = Q_m Λ^{1/2} Pᵀ` with orthonormal `Q_m` (m×n) and `P` (n×n), plus a
/// standard-normal observation vector.
pub(crate) fn random_system(rng: &mut ChaCha8Rng, m: usize, eigenvalues: &[f64]) -> LinearSystem {
    let n = eigenvalues.len();
    assert!(m >= n);
    let q_m = gaussian_matrix(rng, m, n).qr().q();
    let p = random_orthonormal(rng, n);
    let sqrt_lam =
        DMatrix::from_diagonal(&DVector::from_iterator(n, eigenvalues.iter().map(|l| l.sqrt())));
    let a = q_m * sqrt_lam * p.transpose();
    let b = gaussian_vector(rng, m);
    LinearSystem::new(a, b).unwrap()
}

/// The recurring worked example: `A = diag(1, 0.1)`, `b = (1, 0.1)`, so
/// `AᵀA = diag(1, 0.01)` and `Aᵀb = (1, 0.01)`; returned with the
/// eigendecomposition of `AᵀA`.
pub(crate) fn diagonal_example() -> (LinearSystem, SpectralDecomposition) {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1]));
    let system = LinearSystem::new(a, DVector::from_vec(vec![1.0, 0.1])).unwrap();
    let spec = eig_sym(&(system.design().transpose() * system.design())).unwrap();
    (system, spec)
}

/// Random symmetric PSD matrix.
pub(crate) fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    &g * g.transpose()
}
