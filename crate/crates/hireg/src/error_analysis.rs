//! Closed-form approximation residuals, exact bias vectors, error bounds,
//! and the residual sandwich bounds.
//!
//! The central object is the series tail
//!
//! ```text
//! F = Σ_{i=k+1}^{∞} (R(AᵀA+R)⁻¹)ⁱ = (I − RH)⁻¹ (RH)^(k+1),   H = (AᵀA+R)⁻¹
//! ```
//!
//! which is never evaluated by summing: `(I − RH)⁻¹` inherits the
//! conditioning of the original problem, so F is always assembled from
//! eigenvalues as `θ^(k+1)/(1−θ)`. When R is diagonal in the eigenbasis of
//! `AᵀA` that basis is used directly; otherwise `RH` is reached through its
//! symmetric similarity `H^{1/2} R H^{1/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::regularization::{golden_section_min, RegularizationPlan};
use crate::solvers::LinearSystem;
use crate::spectral::{
    eig_sym, eigenvalues_in_basis, max_abs, normal_matrix, symmetrized, SpectralDecomposition,
    SYMMETRY_REL_TOL,
};

fn tail_weight(theta: f64, k: usize) -> f64 {
    if theta == 0.0 {
        0.0
    } else {
        theta.powi(k as i32 + 1) / (1.0 - theta)
    }
}

fn check_radius(theta: &DVector<f64>) -> Result<f64> {
    let rho = theta.iter().fold(0.0_f64, |acc, &t| acc.max(t.abs()));
    if rho < 1.0 {
        Ok(rho)
    } else {
        Err(Error::SpectralRadiusViolation { rho })
    }
}

/// Verify that the two closed-form factors commute; they are both functions
/// of `RH`, so any visible deviation means the inputs were inconsistent.
fn verify_commutation(inv_factor: &DMatrix<f64>, power_factor: &DMatrix<f64>) -> Result<()> {
    let xy = inv_factor * power_factor;
    let yx = power_factor * inv_factor;
    let deviation = max_abs(&(&xy - &yx));
    let tolerance = 1e-9 * (1.0 + max_abs(&xy));
    if deviation <= tolerance {
        Ok(())
    } else {
        Err(Error::CommutationCheck { deviation })
    }
}

struct Similarity {
    /// Eigendecomposition of AᵀA + R.
    m_spec: SpectralDecomposition,
    /// Eigendecomposition of `H^{1/2} R H^{1/2}` (same spectrum as RH).
    t_spec: SpectralDecomposition,
}

impl Similarity {
    fn new(r: &DMatrix<f64>, normal: &DMatrix<f64>) -> Result<Self> {
        let r = symmetrized(r)?;
        let normal = symmetrized(normal)?;
        if r.nrows() != normal.nrows() {
            return Err(Error::DimensionMismatch {
                context: "residual analysis",
                expected: normal.nrows(),
                actual: r.nrows(),
            });
        }
        let m_spec = eig_sym(&(&normal + &r))?;
        if m_spec.smallest() <= 0.0 {
            return Err(Error::Singular("AᵀA + R must be positive definite"));
        }
        let h_half = m_spec.matrix_fn(|l| 1.0 / l.sqrt());
        let t_spec = eig_sym(&(&h_half * &r * &h_half))?;
        Ok(Similarity { m_spec, t_spec })
    }

    /// `g(RH) = H^{-1/2} g(T) H^{1/2}` for a scalar function g of eigenvalues.
    fn function_of_rh(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let h_half = self.m_spec.matrix_fn(|l| 1.0 / l.sqrt());
        let h_inv_half = self.m_spec.matrix_fn(|l| l.sqrt());
        h_inv_half * self.t_spec.matrix_fn(g) * h_half
    }

    /// `H · g(RH) · v = H^{1/2} g(T) H^{1/2} v`.
    fn h_times_function_of_rh(&self, g: impl Fn(f64) -> f64, v: &DVector<f64>) -> DVector<f64> {
        let h_half = self.m_spec.matrix_fn(|l| 1.0 / l.sqrt());
        let weighted = self.t_spec.apply_fn(&(&h_half * v), g);
        h_half * weighted
    }
}

/// Closed-form series tail `F = (I − RH)⁻¹ (RH)^(k+1)` for `H = (AᵀA+R)⁻¹`.
///
/// Also verifies that the two factors commute (they always do in exact
/// arithmetic; the check guards against inconsistent inputs).
pub fn residual_f(r: &DMatrix<f64>, normal: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let normal_sym = symmetrized(normal)?;
    let spec_n = eig_sym(&normal_sym)?;
    if let Some(lam_r) = eigenvalues_in_basis(&spec_n, r) {
        let n = spec_n.dim();
        let mut theta = DVector::zeros(n);
        for i in 0..n {
            let lt = spec_n.eigenvalues()[i] + lam_r[i];
            if lt <= 0.0 {
                return Err(Error::Singular("AᵀA + R must be positive definite"));
            }
            theta[i] = lam_r[i] / lt;
        }
        check_radius(&theta)?;
        let p = spec_n.eigenvectors();
        let of_theta = |g: &dyn Fn(f64) -> f64| {
            let d = DVector::from_iterator(n, theta.iter().map(|&t| g(t)));
            p * DMatrix::from_diagonal(&d) * p.transpose()
        };
        verify_commutation(
            &of_theta(&|t| 1.0 / (1.0 - t)),
            &of_theta(&|t| t.powi(k as i32 + 1)),
        )?;
        return Ok(of_theta(&|t| tail_weight(t, k)));
    }

    let sim = Similarity::new(r, &normal_sym)?;
    check_radius(sim.t_spec.eigenvalues())?;
    verify_commutation(
        &sim.function_of_rh(|t| 1.0 / (1.0 - t)),
        &sim.function_of_rh(|t| t.powi(k as i32 + 1)),
    )?;
    Ok(sim.function_of_rh(|t| tail_weight(t, k)))
}

/// Exact bias of the order-k solution against least squares:
/// `x̂_ls − x̂ᵏ = (AᵀA+R)⁻¹ F Aᵀb`.
///
/// Requires a numerically nonsingular `AᵀA` (the least-squares solution must
/// exist to be compared against) and a contractive series.
pub fn hr_bias(system: &LinearSystem, plan: &RegularizationPlan) -> Result<DVector<f64>> {
    let spec_n = eig_sym(&normal_matrix(system))?;
    if !spec_n.is_numerically_nonsingular() {
        return Err(Error::Singular(
            "AᵀA is numerically singular; the least-squares comparison point does not exist",
        ));
    }
    bias_vector(system, plan, &spec_n)
}

fn bias_vector(
    system: &LinearSystem,
    plan: &RegularizationPlan,
    spec_n: &SpectralDecomposition,
) -> Result<DVector<f64>> {
    let atb = system.normal_rhs();
    let k = plan.order();
    if let Some(lam_r) = eigenvalues_in_basis(spec_n, plan.r_matrix()) {
        let n = spec_n.dim();
        let mut theta = DVector::zeros(n);
        for i in 0..n {
            let lt = spec_n.eigenvalues()[i] + lam_r[i];
            if lt <= 0.0 {
                return Err(Error::Singular("AᵀA + R must be positive definite"));
            }
            theta[i] = lam_r[i] / lt;
        }
        check_radius(&theta)?;
        // Mode-wise: (1/λ̃)·θ^(k+1)/(1−θ) = θ^(k+1)/λ, with λ = λ̃(1−θ) > 0.
        let coeffs = spec_n.eigenvectors().transpose() * atb;
        let bias_coeffs = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let t: f64 = theta[i];
                if t == 0.0 {
                    0.0
                } else {
                    coeffs[i] * t.powi(k as i32 + 1) / spec_n.eigenvalues()[i]
                }
            }),
        );
        return Ok(spec_n.eigenvectors() * bias_coeffs);
    }

    let sim = Similarity::new(plan.r_matrix(), &normal_matrix(system))?;
    check_radius(sim.t_spec.eigenvalues())?;
    Ok(sim.h_times_function_of_rh(|t| tail_weight(t, k), &atb))
}

/// The k = 1 bias through the alternate expansion around `(AᵀA)⁻¹`:
/// `(AᵀA+R)⁻¹ ((I + R(AᵀA)⁻¹)⁻¹ − I + R(AᵀA)⁻¹) Aᵀb`.
///
/// Valid only under the stricter radius condition `ρ(R(AᵀA)⁻¹) < 1`; an
/// error signals that this expansion is inapplicable.
pub fn hr_bias_alternate_k1(system: &LinearSystem, r: &DMatrix<f64>) -> Result<DVector<f64>> {
    let r = symmetrized(r)?;
    let n_mat = normal_matrix(system);
    let spec_n = eig_sym(&n_mat)?;
    if !spec_n.is_numerically_nonsingular() {
        return Err(Error::Singular(
            "AᵀA is numerically singular; the alternate expansion needs its inverse",
        ));
    }
    // R(AᵀA)⁻¹ is similar to N^{-1/2} R N^{-1/2}.
    let n_neg_half = spec_n.matrix_fn(|l| 1.0 / l.sqrt());
    let t_spec = eig_sym(&(&n_neg_half * &r * &n_neg_half))?;
    check_radius(t_spec.eigenvalues())?;

    // (I + RN⁻¹)⁻¹ − I + RN⁻¹ = N^{1/2} diag(t²/(1+t)) N^{-1/2} in T's basis.
    let n_half = spec_n.matrix_fn(|l| l.sqrt());
    let middle = &n_half * t_spec.matrix_fn(|t| t * t / (1.0 + t)) * &n_neg_half;

    let m_spec = eig_sym(&(&n_mat + &r))?;
    if m_spec.smallest() <= 0.0 {
        return Err(Error::Singular("AᵀA + R must be positive definite"));
    }
    Ok(m_spec.apply_fn(&(middle * system.normal_rhs()), |l| 1.0 / l))
}

/// `‖(AᵀA+R)⁻¹ F Aᵀb‖` — the norm of the exact series-truncation bias.
/// Unlike [`hr_bias`] this does not require `AᵀA` to be invertible.
pub fn error_bound(system: &LinearSystem, plan: &RegularizationPlan) -> Result<f64> {
    let spec_n = eig_sym(&normal_matrix(system))?;
    Ok(bias_vector(system, plan, &spec_n)?.norm())
}

/// Sandwich bounds on the series tail for symmetric contractive `RH`:
///
/// ```text
/// (RH)^(k+1)/(1−λ_min)  ⪯  F  ⪯  (RH)^(k+1)/(1−λ_max)
/// ```
///
/// Returns `(lower, upper)`.
pub fn residual_bounds(
    r: &DMatrix<f64>,
    normal: &DMatrix<f64>,
    k: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = symmetrized(r)?;
    let normal = symmetrized(normal)?;
    let m_spec = eig_sym(&(&normal + &r))?;
    if m_spec.smallest() <= 0.0 {
        return Err(Error::Singular("AᵀA + R must be positive definite"));
    }
    let h = m_spec.matrix_fn(|l| 1.0 / l);
    let rh = &r * &h;
    // The theorem needs RH itself symmetric (R and H commuting).
    let scale = 1.0 + max_abs(&rh);
    let asym = max_abs(&(&rh - rh.transpose()));
    if asym > SYMMETRY_REL_TOL * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: SYMMETRY_REL_TOL * scale,
        });
    }
    let rh_spec = eig_sym(&rh)?;
    check_radius(rh_spec.eigenvalues())?;
    let theta_max = rh_spec.largest();
    let theta_min = rh_spec.smallest();
    let power = rh_spec.matrix_fn(|t| t.powi(k as i32 + 1));
    let lower = &power / (1.0 - theta_min);
    let upper = &power / (1.0 - theta_max);
    Ok((lower, upper))
}

/// Bound on the Tikhonov-versus-LS gap: the k = 0 instance of
/// [`error_bound`] with `R = μ²I`.
pub fn tr_ls_gap_bound(system: &LinearSystem, mu2: f64) -> Result<f64> {
    let plan = RegularizationPlan::tikhonov(system.unknowns(), mu2)?;
    error_bound(system, &plan)
}

/// Diagnostic: the ω in [λ_min, λ_max] whose single scaled power term
/// `(RH)^(k+1)/(1−ω)` best approximates the tail F in the Frobenius sense.
pub fn optimal_omega_frobenius(r: &DMatrix<f64>, normal: &DMatrix<f64>, k: usize) -> Result<f64> {
    let r = symmetrized(r)?;
    let normal = symmetrized(normal)?;
    let m_spec = eig_sym(&(&normal + &r))?;
    if m_spec.smallest() <= 0.0 {
        return Err(Error::Singular("AᵀA + R must be positive definite"));
    }
    let h = m_spec.matrix_fn(|l| 1.0 / l);
    let rh = &r * &h;
    let scale = 1.0 + max_abs(&rh);
    let asym = max_abs(&(&rh - rh.transpose()));
    if asym > SYMMETRY_REL_TOL * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: SYMMETRY_REL_TOL * scale,
        });
    }
    let rh_spec = eig_sym(&rh)?;
    check_radius(rh_spec.eigenvalues())?;
    let thetas: Vec<f64> = rh_spec.eigenvalues().iter().copied().collect();
    let (lo, hi) = (rh_spec.smallest(), rh_spec.largest());
    if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
        return Ok(lo);
    }
    let objective = |omega: f64| {
        thetas
            .iter()
            .map(|&t| {
                let p = t.powi(k as i32 + 1);
                let g = if t == 0.0 { 0.0 } else { p / (1.0 - t) } - p / (1.0 - omega);
                g * g
            })
            .sum::<f64>()
    };
    Ok(golden_section_min(objective, lo, hi, 1e-12 * (1.0 + hi)))
}
