//! Symmetric eigen-analysis of the normal matrix and conditioning diagnostics.
//!
//! Every other module funnels its matrix inverses through this one: an
//! inverse of `AᵀA + R` is always `P diag(1/λ̃) Pᵀ` from an explicit
//! symmetric eigendecomposition, never a generic LU solve. For the matrix
//! family used here (R sharing eigenvectors with `AᵀA`) this is exact and
//! cheap, and it keeps the smallest eigenvalue — the quantity everything
//! else is conditioned on — under direct control.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solvers::LinearSystem;

/// Relative symmetry tolerance: `‖M − Mᵀ‖_max ≤ SYMMETRY_REL_TOL · (1 + ‖M‖_max)`.
/// Floating-point products `AᵀA` are only symmetric up to rounding, so inputs
/// inside the tolerance are symmetrized by averaging.
pub const SYMMETRY_REL_TOL: f64 = 1e-9;

/// Eigenvalues below `RANK_REL_TOL · λ_1` are treated as numerically zero for
/// rank decisions.
pub const RANK_REL_TOL: f64 = 1e-14;

/// Default margin for the contraction check: ρ must be `< 1 − DEFAULT_RADIUS_MARGIN`.
pub const DEFAULT_RADIUS_MARGIN: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Eigenvalues λ_1 ≥ λ_2 ≥ … ≥ λ_n.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector matrix P; column i pairs with eigenvalue i.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// λ_1.
    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// λ_n.
    pub fn smallest(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// λ_{n-1}. For n = 1 this is λ_1.
    pub fn second_smallest(&self) -> f64 {
        let n = self.dim();
        self.eigenvalues[n.saturating_sub(2)]
    }

    /// Number of eigenvalues above the numeric-zero threshold `RANK_REL_TOL · λ_1`.
    pub fn numeric_rank(&self) -> usize {
        let threshold = RANK_REL_TOL * self.largest().abs();
        self.eigenvalues.iter().filter(|&&l| l > threshold).count()
    }

    /// True when the smallest eigenvalue is numerically nonzero.
    pub fn is_numerically_nonsingular(&self) -> bool {
        self.smallest() > RANK_REL_TOL * self.largest().abs()
    }

    /// Rebuild `P diag(λ) Pᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let p = &self.eigenvectors;
        p * DMatrix::from_diagonal(&self.eigenvalues) * p.transpose()
    }

    /// Apply `P diag(f(λ_i)) Pᵀ` to a vector.
    pub fn apply_fn(&self, v: &DVector<f64>, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let mut coeffs = self.eigenvectors.transpose() * v;
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c *= f(self.eigenvalues[i]);
        }
        &self.eigenvectors * coeffs
    }

    /// Materialize `P diag(f(λ_i)) Pᵀ`.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| f(l)));
        &self.eigenvectors * DMatrix::from_diagonal(&d) * self.eigenvectors.transpose()
    }
}

/// Largest absolute entry; 0 for empty matrices.
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Check symmetry within tolerance and return the symmetrized average.
pub(crate) fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "symmetric matrix",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let scale = 1.0 + max_abs(m);
    let tolerance = SYMMETRY_REL_TOL * scale;
    let mut asymmetry = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

/// Form the normal matrix `AᵀA`, symmetrized against rounding.
pub fn normal_matrix(system: &LinearSystem) -> DMatrix<f64> {
    let a = system.design();
    let n = a.transpose() * a;
    // AᵀA is symmetric by construction; averaging removes rounding skew.
    symmetrized(&n).expect("AᵀA is symmetric by construction")
}

/// Symmetric eigendecomposition with descending eigenvalue order.
///
/// The input must be symmetric within [`SYMMETRY_REL_TOL`]; it is symmetrized
/// by averaging before factorization.
pub fn eig_sym(m: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let sym = symmetrized(m)?;
    let n = sym.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("eig_sym"));
    }
    let eig = nalgebra::SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Condition number λ_1/λ_n of a symmetric positive definite matrix.
///
/// Errors when λ_n ≤ 0, which signals an ill-posed (singular) input.
pub fn condition_number(spec: &SpectralDecomposition) -> Result<f64> {
    let smallest = spec.smallest();
    if smallest <= 0.0 {
        return Err(Error::Singular(
            "condition number undefined: smallest eigenvalue is not positive",
        ));
    }
    Ok(spec.largest() / smallest)
}

/// Result of the contraction check on `ρ(R(AᵀA+R)⁻¹)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    /// ρ(R(AᵀA+R)⁻¹).
    pub value: f64,
    /// Whether ρ < 1 − margin.
    pub contractive: bool,
}

/// Compute ρ(R(AᵀA+R)⁻¹) and check it against `1 − margin`.
///
/// `R(AᵀA+R)⁻¹` is similar to the symmetric matrix `H^{1/2} R H^{1/2}` with
/// `H = (AᵀA+R)⁻¹`, so the radius is read off a symmetric eigenproblem.
/// For symmetric PSD `R` and PD `AᵀA` the check always passes.
pub fn spectral_radius_ok_with_margin(
    r: &DMatrix<f64>,
    normal: &DMatrix<f64>,
    margin: f64,
) -> Result<SpectralRadius> {
    let r = symmetrized(r)?;
    let n = symmetrized(normal)?;
    if r.nrows() != n.nrows() {
        return Err(Error::DimensionMismatch {
            context: "spectral_radius_ok",
            expected: n.nrows(),
            actual: r.nrows(),
        });
    }
    let m = eig_sym(&(&n + &r))?;
    if m.smallest() <= 0.0 {
        return Err(Error::Singular("AᵀA + R must be positive definite"));
    }
    let h_half = m.matrix_fn(|l| 1.0 / l.sqrt());
    let t = eig_sym(&(&h_half * &r * &h_half))?;
    let value = t
        .eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    Ok(SpectralRadius {
        value,
        contractive: value < 1.0 - margin,
    })
}

/// [`spectral_radius_ok_with_margin`] with the default margin of `1e−12`.
pub fn spectral_radius_ok(r: &DMatrix<f64>, normal: &DMatrix<f64>) -> Result<SpectralRadius> {
    spectral_radius_ok_with_margin(r, normal, DEFAULT_RADIUS_MARGIN)
}

/// Eigenvalues of `r` expressed in the eigenbasis of `spec`, when `r` is
/// numerically diagonal in that basis (i.e. commutes with the decomposed
/// matrix); `None` otherwise.
pub(crate) fn eigenvalues_in_basis(
    spec: &SpectralDecomposition,
    r: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    let n = spec.dim();
    if r.nrows() != n || r.ncols() != n {
        return None;
    }
    let b = spec.eigenvectors().transpose() * r * spec.eigenvectors();
    let scale = 1.0 + max_abs(&b);
    let mut off = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(b[(i, j)].abs());
            }
        }
    }
    if off <= SYMMETRY_REL_TOL * scale {
        Some(b.diagonal())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        random_matrix(rng, n, n).qr().q()
    }

    #[test]
    fn normal_matrix_of_identity_is_identity() {
        let system = LinearSystem::new(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert_eq!(normal_matrix(&system), DMatrix::identity(3, 3));
    }

    #[test]
    fn normal_matrix_of_diagonal_design() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1]));
        let system = LinearSystem::new(a, DVector::zeros(2)).unwrap();
        let n = normal_matrix(&system);
        assert_relative_eq!(n[(0, 0)], 1.0, max_relative = 1e-15);
        assert_relative_eq!(n[(1, 1)], 0.01, max_relative = 1e-15);
        assert_eq!(n[(0, 1)], 0.0);
    }

    #[test]
    fn normal_matrix_of_unit_anchor_differences() {
        // Anchor differences (1,0,0),(0,1,0),(0,0,1) against the origin.
        let a = DMatrix::identity(3, 3);
        let system = LinearSystem::new(a, DVector::zeros(3)).unwrap();
        assert_eq!(normal_matrix(&system), DMatrix::identity(3, 3));
    }

    #[test]
    fn eig_sym_diagonal_is_sorted_descending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 1.0]));
        let spec = eig_sym(&m).unwrap();
        assert_eq!(spec.eigenvalues().as_slice(), &[3.0, 2.0, 1.0]);
        // Columns are signed unit vectors of the permuted identity.
        for col in 0..3 {
            let c = spec.eigenvectors().column(col);
            assert_relative_eq!(c.norm(), 1.0, max_relative = 1e-14);
            assert_eq!(c.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        }
    }

    #[test]
    fn eig_sym_two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let spec = eig_sym(&m).unwrap();
        assert_relative_eq!(spec.eigenvalues()[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(spec.eigenvalues()[1], 1.0, max_relative = 1e-14);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = spec.eigenvectors().column(0);
        let v1 = spec.eigenvectors().column(1);
        assert_relative_eq!(v0[0].abs(), inv_sqrt2, max_relative = 1e-12);
        assert_relative_eq!(v0[0], v0[1], max_relative = 1e-12);
        assert_relative_eq!(v1[0].abs(), inv_sqrt2, max_relative = 1e-12);
        assert_relative_eq!(v1[0], -v1[1], max_relative = 1e-12);
    }

    #[test]
    fn eig_sym_zero_matrix() {
        let spec = eig_sym(&DMatrix::zeros(4, 4)).unwrap();
        assert!(spec.eigenvalues().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn eig_sym_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(eig_sym(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eig_sym_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=8 {
            let g = random_matrix(&mut rng, n, n);
            let m = &g * g.transpose();
            let spec = eig_sym(&m).unwrap();
            let scale = max_abs(&m);
            assert!(max_abs(&(&spec.reconstruct() - &m)) <= 1e-10 * scale);
            let ptp = spec.eigenvectors().transpose() * spec.eigenvectors();
            assert!(max_abs(&(&ptp - DMatrix::identity(n, n))) <= 1e-12);
        }
    }

    #[test]
    fn eig_sym_trace_and_determinant_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=4 {
            let g = random_matrix(&mut rng, n, n);
            let m = &g * g.transpose();
            let spec = eig_sym(&m).unwrap();
            let eig_sum: f64 = spec.eigenvalues().iter().sum();
            assert_relative_eq!(eig_sum, m.trace(), max_relative = 1e-10);
            let eig_prod: f64 = spec.eigenvalues().iter().product();
            assert_relative_eq!(eig_prod, m.determinant(), max_relative = 1e-8);
        }
    }

    #[test]
    fn condition_number_examples() {
        let spec = eig_sym(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(condition_number(&spec).unwrap(), 1.0);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0, 0.01]));
        let spec = eig_sym(&m).unwrap();
        assert_relative_eq!(condition_number(&spec).unwrap(), 10000.0, max_relative = 1e-12);
    }

    #[test]
    fn condition_number_rejects_singular_input() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let spec = eig_sym(&m).unwrap();
        assert!(matches!(condition_number(&spec), Err(Error::Singular(_))));
    }

    #[test]
    fn condition_number_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 4, 4);
            let m = &g * g.transpose() + DMatrix::identity(4, 4) * 0.1;
            let spec = eig_sym(&m).unwrap();
            let scaled = eig_sym(&(&m * 37.5)).unwrap();
            assert_relative_eq!(
                condition_number(&spec).unwrap(),
                condition_number(&scaled).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn spectral_radius_zero_regularizer() {
        let normal = DMatrix::identity(3, 3);
        let r = DMatrix::zeros(3, 3);
        let check = spectral_radius_ok(&r, &normal).unwrap();
        assert_eq!(check.value, 0.0);
        assert!(check.contractive);
    }

    #[test]
    fn spectral_radius_diagonal_case() {
        let normal = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.01]));
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.99]));
        let check = spectral_radius_ok(&r, &normal).unwrap();
        assert_relative_eq!(check.value, 0.99, max_relative = 1e-12);
        assert!(check.contractive);
    }

    #[test]
    fn spectral_radius_always_contractive_for_psd_r() {
        // Random PSD R against random PD AᵀA: the contraction holds by construction.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..50 {
            let n = 2 + trial % 5;
            let a = random_matrix(&mut rng, n + 2, n);
            let normal = a.transpose() * &a + DMatrix::identity(n, n) * 1e-6;
            let g = random_matrix(&mut rng, n, n);
            let r = &g * g.transpose();
            let check = spectral_radius_ok(&r, &normal).unwrap();
            assert!(
                check.contractive,
                "trial {trial}: rho = {} not contractive",
                check.value
            );
        }
    }

    #[test]
    fn spectral_radius_rejects_indefinite_sum() {
        let normal = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.0]));
        assert!(matches!(
            spectral_radius_ok(&r, &normal),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthonormal(&mut rng, 5);
        let qtq = q.transpose() * &q;
        assert!(max_abs(&(&qtq - DMatrix::identity(5, 5))) < 1e-12);
    }
}
