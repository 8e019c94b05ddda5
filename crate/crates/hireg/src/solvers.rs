//! The estimator family: least squares, Tikhonov, truncated SVD, and the
//! k-th order regularized series solution with an optional ω adjustment.
//!
//! The series solution is
//!
//! ```text
//! x̂ᵏ = (AᵀA+R)⁻¹ Σ_{i=0}^{k} (R(AᵀA+R)⁻¹)ⁱ Aᵀb
//! ```
//!
//! evaluated by iterating vectors (`v ← R·(H·v)`, H computed once) rather
//! than matrix powers. When R is diagonal in the eigenbasis of `AᵀA` — the
//! identity and relaxed forms both are — the whole series runs mode-wise in
//! that shared basis, so the k→∞ limit agrees with the least-squares
//! solution to rounding and not merely to the conditioning of `AᵀA`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::regularization::{MethodTag, RegularizationForm, RegularizationPlan, ResolvedMethod};
use crate::spectral::{
    eig_sym, eigenvalues_in_basis, normal_matrix, symmetrized, SpectralDecomposition,
    DEFAULT_RADIUS_MARGIN, RANK_REL_TOL,
};

/// A linear observation model `Ax = b` with m ≥ n.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() < a.ncols() || a.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "LinearSystem (need m >= n >= 1)",
                expected: a.ncols(),
                actual: a.nrows(),
            });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "LinearSystem observations",
                expected: a.nrows(),
                actual: b.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation vector"));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn unknowns(&self) -> usize {
        self.a.ncols()
    }

    /// `Aᵀb`, the right-hand side of the normal equations.
    pub fn normal_rhs(&self) -> DVector<f64> {
        self.a.transpose() * &self.b
    }

    /// Same design matrix with a new observation vector (the design stays
    /// fixed across measurements in localization use).
    pub fn with_observations(&self, b: DVector<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b)
    }
}

/// An estimate together with its conditioning and bias diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub estimate: DVector<f64>,
    pub method: MethodTag,
    /// κ(AᵀA) = λ_1/λ_n; infinite when AᵀA is numerically singular.
    pub condition_before: f64,
    /// κ(AᵀA+R) after regularization (λ_1/μ² for the relaxed form).
    pub condition_after: f64,
    /// ρ(R(AᵀA+R)⁻¹).
    pub spectral_radius: f64,
    /// Norm of the exact series-truncation bias versus the least-squares
    /// solution (for TSVD, the norm of the dropped components); 0 for exact
    /// methods.
    pub bias_bound: f64,
    /// Series terms actually summed (k+1 for order k, plus one when
    /// adjusted; 0 for non-series methods).
    pub series_terms_used: usize,
}

fn condition_before(spec: &SpectralDecomposition) -> f64 {
    if spec.smallest() > 0.0 {
        spec.largest() / spec.smallest()
    } else {
        f64::INFINITY
    }
}

/// Least-squares solution `(AᵀA)⁻¹Aᵀb` through the eigendecomposition.
pub fn solve_ls(system: &LinearSystem) -> Result<SolveOutcome> {
    let spec = eig_sym(&normal_matrix(system))?;
    if !spec.is_numerically_nonsingular() {
        return Err(Error::Singular(
            "AᵀA is numerically singular; regularize before solving",
        ));
    }
    let estimate = spec.apply_fn(&system.normal_rhs(), |l| 1.0 / l);
    let kappa = condition_before(&spec);
    Ok(SolveOutcome {
        estimate,
        method: MethodTag::Ls,
        condition_before: kappa,
        condition_after: kappa,
        spectral_radius: 0.0,
        bias_bound: 0.0,
        series_terms_used: 0,
    })
}

/// Tikhonov solution `(AᵀA+μ²I)⁻¹Aᵀb`; equals [`solve_ls`] at μ² = 0 on
/// nonsingular systems.
pub fn solve_tikhonov(system: &LinearSystem, mu2: f64) -> Result<SolveOutcome> {
    let plan = RegularizationPlan::tikhonov(system.unknowns(), mu2)?;
    let out = solve_hr(system, &plan)?;
    Ok(SolveOutcome {
        method: MethodTag::Tr,
        ..out
    })
}

/// Pseudo-inverse solution with the `truncate_count` smallest spectral
/// components of `AᵀA` dropped entirely.
pub fn solve_tsvd(system: &LinearSystem, truncate_count: usize) -> Result<SolveOutcome> {
    let n = system.unknowns();
    if truncate_count >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot truncate {truncate_count} of {n} spectral components"
        )));
    }
    let spec = eig_sym(&normal_matrix(system))?;
    let kept = n - truncate_count;
    let zero_threshold = RANK_REL_TOL * spec.largest().abs();
    if spec.eigenvalues()[kept - 1] <= zero_threshold {
        return Err(Error::Singular(
            "kept spectral components include a numerically zero eigenvalue",
        ));
    }
    let coeffs = spec.eigenvectors().transpose() * system.normal_rhs();
    let mut solution_coeffs = DVector::zeros(n);
    let mut dropped_norm_sq = 0.0;
    for i in 0..n {
        let l = spec.eigenvalues()[i];
        if i < kept {
            solution_coeffs[i] = coeffs[i] / l;
        } else if l > zero_threshold {
            // Component the pseudo-inverse discards but LS would keep.
            dropped_norm_sq += (coeffs[i] / l).powi(2);
        }
    }
    let estimate = spec.eigenvectors() * solution_coeffs;
    Ok(SolveOutcome {
        estimate,
        method: MethodTag::Tsvd,
        condition_before: condition_before(&spec),
        condition_after: spec.largest() / spec.eigenvalues()[kept - 1],
        spectral_radius: 0.0,
        bias_bound: dropped_norm_sq.sqrt(),
        series_terms_used: 0,
    })
}

/// The k-th order regularized solution for the given plan.
pub fn solve_hr(system: &LinearSystem, plan: &RegularizationPlan) -> Result<SolveOutcome> {
    series_engine(system, plan, false)
}

/// The k-th order solution plus the ω-weighted (k+1)-th correction term
/// `(1/(1−ω))·(AᵀA+R)⁻¹(R(AᵀA+R)⁻¹)^{k+1}Aᵀb`, with 0 ≤ ω ≤ λ_max.
///
/// With ω = 0 this equals [`solve_hr`] at order k+1; with ω equal to the
/// largest eigenvalue of `R(AᵀA+R)⁻¹` the modified modes are summed in
/// closed form, recovering the least-squares values there.
pub fn solve_hr_adjusted(system: &LinearSystem, plan: &RegularizationPlan) -> Result<SolveOutcome> {
    series_engine(system, plan, true)
}

/// Dispatch a resolved method to its solver.
pub fn solve_with(system: &LinearSystem, method: &ResolvedMethod) -> Result<SolveOutcome> {
    match method {
        ResolvedMethod::LeastSquares => solve_ls(system),
        ResolvedMethod::Tsvd { truncate } => solve_tsvd(system, *truncate),
        ResolvedMethod::Series(plan) => {
            if plan.omega().is_some() {
                solve_hr_adjusted(system, plan)
            } else {
                solve_hr(system, plan)
            }
        }
    }
}

fn check_contractive(rho: f64) -> Result<()> {
    if rho < 1.0 - DEFAULT_RADIUS_MARGIN {
        Ok(())
    } else {
        Err(Error::SpectralRadiusViolation { rho })
    }
}

fn check_omega(omega: f64, lambda_max: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + lambda_max.abs());
    if omega >= -slack && omega <= lambda_max + slack && omega < 1.0 {
        Ok(())
    } else {
        Err(Error::OmegaOutOfRange {
            omega,
            max: lambda_max,
        })
    }
}

fn condition_after_commuting(plan: &RegularizationPlan, spec: &SpectralDecomposition) -> f64 {
    match plan.form() {
        RegularizationForm::Zero => condition_before(spec),
        RegularizationForm::Identity => {
            (spec.largest() + plan.mu2()) / (spec.smallest() + plan.mu2())
        }
        RegularizationForm::Relaxed => {
            if plan.mu2() <= spec.smallest() {
                condition_before(spec)
            } else {
                spec.largest() / plan.mu2()
            }
        }
    }
}

fn series_engine(
    system: &LinearSystem,
    plan: &RegularizationPlan,
    adjusted: bool,
) -> Result<SolveOutcome> {
    let n = system.unknowns();
    if plan.r_matrix().nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "regularization matrix",
            expected: n,
            actual: plan.r_matrix().nrows(),
        });
    }
    let n_mat = normal_matrix(system);
    let spec_n = eig_sym(&n_mat)?;
    let atb = system.normal_rhs();
    let k = plan.order();
    let omega = plan.omega().unwrap_or(0.0);

    if let Some(lam_r) = eigenvalues_in_basis(&spec_n, plan.r_matrix()) {
        // R is diagonal in the eigenbasis of AᵀA: run the series mode-wise.
        let lam = spec_n.eigenvalues();
        let mut theta = DVector::zeros(n);
        for i in 0..n {
            let lt = lam[i] + lam_r[i];
            if lt <= 0.0 {
                return Err(Error::Singular("AᵀA + R must be positive definite"));
            }
            theta[i] = lam_r[i] / lt;
        }
        let rho = theta.iter().fold(0.0_f64, |acc, &t| acc.max(t.abs()));
        check_contractive(rho)?;
        if adjusted {
            check_omega(omega, theta.max())?;
        }

        let coeffs = spec_n.eigenvectors().transpose() * &atb;
        let mut solution_coeffs = DVector::zeros(n);
        let mut bias_sq = 0.0;
        for i in 0..n {
            let lt = lam[i] + lam_r[i];
            let t = theta[i];
            let mut power = 1.0;
            let mut sum = 1.0;
            for _ in 0..k {
                power *= t;
                sum += power;
            }
            let next_power = power * t; // t^(k+1)
            if adjusted {
                sum += next_power / (1.0 - omega);
            }
            solution_coeffs[i] = coeffs[i] / lt * sum;

            // Exact residual weight on this mode: t^(k+1)/(1−t), minus the
            // correction already applied when adjusting.
            if t != 0.0 {
                let mut weight = next_power / (1.0 - t);
                if adjusted {
                    weight -= next_power / (1.0 - omega);
                }
                bias_sq += (coeffs[i] / lt * weight).powi(2);
            }
        }
        let estimate = spec_n.eigenvectors() * solution_coeffs;
        return Ok(SolveOutcome {
            estimate,
            method: plan.method(),
            condition_before: condition_before(&spec_n),
            condition_after: condition_after_commuting(plan, &spec_n),
            spectral_radius: rho,
            bias_bound: bias_sq.sqrt(),
            series_terms_used: k + 1 + usize::from(adjusted),
        });
    }

    // General symmetric R: work through AᵀA+R and the symmetric similarity
    // H^{1/2} R H^{1/2} of R(AᵀA+R)⁻¹.
    let r = symmetrized(plan.r_matrix())?;
    let m_spec = eig_sym(&(&n_mat + &r))?;
    if m_spec.smallest() <= 0.0 {
        return Err(Error::Singular("AᵀA + R must be positive definite"));
    }
    let h_half = m_spec.matrix_fn(|l| 1.0 / l.sqrt());
    let t_spec = eig_sym(&(&h_half * &r * &h_half))?;
    let rho = t_spec
        .eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &t| acc.max(t.abs()));
    check_contractive(rho)?;
    if adjusted {
        check_omega(omega, t_spec.largest())?;
    }

    let apply_h = |v: &DVector<f64>| m_spec.apply_fn(v, |l| 1.0 / l);
    let mut power_vec = atb.clone();
    let mut acc = atb.clone();
    for _ in 0..k {
        power_vec = &r * apply_h(&power_vec);
        acc += &power_vec;
    }
    let next_power_vec = &r * apply_h(&power_vec); // (RH)^(k+1) Aᵀb
    let mut estimate = apply_h(&acc);
    if adjusted {
        estimate += apply_h(&next_power_vec) / (1.0 - omega);
    }

    // Bias through the same similarity: H·f(RH) = H^{1/2} f(T) H^{1/2}.
    let half_atb = &h_half * &atb;
    let correction = if adjusted { 1.0 / (1.0 - omega) } else { 0.0 };
    let weighted = t_spec.apply_fn(&half_atb, |t| {
        if t == 0.0 {
            0.0
        } else {
            t.powi(k as i32 + 1) * (1.0 / (1.0 - t) - correction)
        }
    });
    let bias_bound = (&h_half * weighted).norm();

    Ok(SolveOutcome {
        estimate,
        method: plan.method(),
        condition_before: condition_before(&spec_n),
        condition_after: m_spec.largest() / m_spec.smallest(),
        spectral_radius: rho,
        bias_bound,
        series_terms_used: k + 1 + usize::from(adjusted),
    })
}
