//! Regularization-matrix construction and a-priori parameter selection.
//!
//! Two matrix families are supported: the identity form `R = μ²I` and the
//! relaxed form `R = P diag(max{μ²−λ_i, 0}) Pᵀ` that shares eigenvectors with
//! `AᵀA` and raises only the eigenvalues below μ². The regularization level
//! μ² is either given explicitly or selected a priori by minimizing
//!
//! ```text
//! loss(μ²) = ‖residual series from order k+1 on‖ + κ(AᵀA + R)
//!          = (μ²/λ_n)·((μ²−λ_n)/μ²)^(k+1) + λ_1/μ²
//! ```
//!
//! over the admissible interval [λ_{s+1}, λ_s]. Closed forms exist for
//! k = 0 and k = 1; higher orders use a golden-section search (the loss is
//! convex in μ²).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralDecomposition;

/// Condition-number target used when the relaxation cut is selected
/// automatically: the cut keeps every mode with λ_1/λ_s at or below this.
pub const DEFAULT_CONDITION_TARGET: f64 = 1e3;

/// Estimator family labels used in reports and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Ls,
    Tr,
    Tsvd,
    Ftr,
    Oftr,
    Hr,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Ls => "ls",
            MethodTag::Tr => "tr",
            MethodTag::Tsvd => "tsvd",
            MethodTag::Ftr => "ftr",
            MethodTag::Oftr => "oftr",
            MethodTag::Hr => "hr",
        }
    }
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MethodTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(MethodTag::Ls),
            "tr" => Ok(MethodTag::Tr),
            "tsvd" => Ok(MethodTag::Tsvd),
            "ftr" => Ok(MethodTag::Ftr),
            "oftr" => Ok(MethodTag::Oftr),
            "hr" => Ok(MethodTag::Hr),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected ls|tr|tsvd|ftr|oftr|hr)"
            ))),
        }
    }
}

/// Structure of the regularization matrix inside a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizationForm {
    /// R = 0 (plain least squares through the series machinery).
    Zero,
    /// R = μ²I.
    Identity,
    /// R shares eigenvectors with AᵀA and has eigenvalues max{μ²−λ_i, 0}.
    Relaxed,
}

/// A fully realized regularization choice: order k, cut s, level μ²,
/// optional adjustment ω, and the materialized matrix R.
///
/// Constructed through [`RegularizationPlan::unregularized`],
/// [`RegularizationPlan::tikhonov`], or [`RegularizationPlan::relaxed`], which
/// keep the matrix consistent with the recorded parameters.
#[derive(Debug, Clone)]
pub struct RegularizationPlan {
    method: MethodTag,
    k: usize,
    s: usize,
    mu2: f64,
    omega: Option<f64>,
    form: RegularizationForm,
    r_matrix: DMatrix<f64>,
}

impl RegularizationPlan {
    /// R = 0; the series collapses to the least-squares solution for any k.
    pub fn unregularized(n: usize) -> Self {
        RegularizationPlan {
            method: MethodTag::Ls,
            k: 0,
            s: n,
            mu2: 0.0,
            omega: None,
            form: RegularizationForm::Zero,
            r_matrix: DMatrix::zeros(n, n),
        }
    }

    /// R = μ²I with series order 0 (the classical Tikhonov configuration).
    pub fn tikhonov(n: usize, mu2: f64) -> Result<Self> {
        Self::tikhonov_with_order(n, mu2, 0)
    }

    /// R = μ²I with an arbitrary series order.
    pub fn tikhonov_with_order(n: usize, mu2: f64, k: usize) -> Result<Self> {
        if !(mu2 >= 0.0) || !mu2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu2 must be a finite nonnegative number, got {mu2}"
            )));
        }
        Ok(RegularizationPlan {
            method: MethodTag::Tr,
            k,
            s: n,
            mu2,
            omega: None,
            form: if mu2 == 0.0 {
                RegularizationForm::Zero
            } else {
                RegularizationForm::Identity
            },
            r_matrix: build_tikhonov_r(n, mu2),
        })
    }

    /// Relaxed R built from the eigendecomposition of `AᵀA`.
    ///
    /// `s` is the relaxation cut (1 ≤ s ≤ n): modes with eigenvalues below
    /// λ_s are candidates for modification, so μ² must not exceed λ_s.
    /// A μ² at or below λ_n yields R = 0.
    pub fn relaxed(spec: &SpectralDecomposition, s: usize, mu2: f64, k: usize) -> Result<Self> {
        let n = spec.dim();
        if s == 0 || s > n {
            return Err(Error::InvalidArgument(format!(
                "relaxation cut s = {s} outside 1..={n}"
            )));
        }
        if !(mu2 > 0.0) || !mu2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu2 must be a finite positive number, got {mu2}"
            )));
        }
        let lambda_s = spec.eigenvalues()[s - 1];
        if mu2 > lambda_s * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "mu2 = {mu2} exceeds λ_s = {lambda_s} for cut s = {s}"
            )));
        }
        Ok(RegularizationPlan {
            method: MethodTag::Hr,
            k,
            s,
            mu2,
            omega: None,
            form: RegularizationForm::Relaxed,
            r_matrix: build_relaxed_r(spec, mu2),
        })
    }

    /// Attach an adjustment parameter ω (validated at solve time against
    /// the realized spectrum of `R(AᵀA+R)⁻¹`).
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    /// Override the report label.
    pub fn with_method_tag(mut self, tag: MethodTag) -> Self {
        self.method = tag;
        self
    }

    /// Override the series order.
    pub fn with_order(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn cut(&self) -> usize {
        self.s
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn omega(&self) -> Option<f64> {
        self.omega
    }

    pub fn form(&self) -> RegularizationForm {
        self.form
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r_matrix
    }
}

/// `R = P diag(max{μ²−λ_i, 0}) Pᵀ`; the sum `AᵀA + R` then has eigenvalues
/// `max{λ_i, μ²}`.
pub fn build_relaxed_r(spec: &SpectralDecomposition, mu2: f64) -> DMatrix<f64> {
    spec.matrix_fn(|l| (mu2 - l).max(0.0))
}

/// `R = μ² I_n`.
pub fn build_tikhonov_r(n: usize, mu2: f64) -> DMatrix<f64> {
    DMatrix::identity(n, n) * mu2
}

fn check_spectrum(lambda1: f64, lambda_n_minus_1: f64, lambda_n: f64) -> Result<()> {
    let ordered = lambda_n > 0.0
        && lambda_n <= lambda_n_minus_1
        && lambda_n_minus_1 <= lambda1
        && lambda1.is_finite();
    if ordered {
        Ok(())
    } else {
        Err(Error::InvalidSpectrum {
            lambda1,
            lambda_n_minus_1,
            lambda_n,
        })
    }
}

/// A-priori optimal μ² for order k = 0 (the OFTR parameter):
/// `√(2λ_1/λ_n)` clamped into the admissible interval [λ_n, λ_{n-1}].
pub fn optimal_mu2_k0(lambda1: f64, lambda_n_minus_1: f64, lambda_n: f64) -> Result<f64> {
    check_spectrum(lambda1, lambda_n_minus_1, lambda_n)?;
    Ok((2.0 * lambda1 / lambda_n).sqrt().clamp(lambda_n, lambda_n_minus_1))
}

/// A-priori optimal μ² for order k = 1:
/// `min{√(λ_n² + λ_n λ_1), λ_{n-1}}`, floored at λ_n.
pub fn optimal_mu2_k1(lambda1: f64, lambda_n_minus_1: f64, lambda_n: f64) -> Result<f64> {
    check_spectrum(lambda1, lambda_n_minus_1, lambda_n)?;
    Ok((lambda_n * lambda_n + lambda_n * lambda1)
        .sqrt()
        .min(lambda_n_minus_1)
        .max(lambda_n))
}

/// A-priori loss at level μ² for series order k, with the relaxed R that
/// modifies the smallest eigenvalue:
/// `(μ²/λ_n)·((μ²−λ_n)/μ²)^(k+1) + λ_1/μ²`.
///
/// At μ² = λ_n the residual term vanishes and the loss is κ(AᵀA) = λ_1/λ_n.
pub fn loss_relaxed(mu2: f64, k: usize, lambda1: f64, lambda_n: f64) -> Result<f64> {
    if !(lambda_n > 0.0) {
        return Err(Error::InvalidSpectrum {
            lambda1,
            lambda_n_minus_1: lambda_n,
            lambda_n,
        });
    }
    if mu2 < lambda_n * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "mu2 = {mu2} below the admissible lower end λ_n = {lambda_n}"
        )));
    }
    let ratio = ((mu2 - lambda_n) / mu2).max(0.0);
    let residual = (mu2 / lambda_n) * ratio.powi(k as i32 + 1);
    Ok(residual + lambda1 / mu2)
}

/// Golden-section minimizer of a convex function on [a, b].
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    if hi <= lo {
        return lo;
    }
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The minimum may sit exactly on an interval end.
    let candidates = [a, mid, b];
    candidates
        .into_iter()
        .min_by(|&x, &y| f(x).partial_cmp(&f(y)).expect("finite loss"))
        .unwrap()
}

/// Minimize [`loss_relaxed`] over [λ_n, λ_{n-1}] by golden-section search
/// (absolute tolerance `1e−10·λ_{n-1}`). The loss is convex, so the search
/// converges to the unique constrained minimizer for any order k.
pub fn optimal_mu2_general(
    k: usize,
    lambda1: f64,
    lambda_n_minus_1: f64,
    lambda_n: f64,
) -> Result<f64> {
    check_spectrum(lambda1, lambda_n_minus_1, lambda_n)?;
    if lambda_n_minus_1 == lambda_n {
        return Ok(lambda_n);
    }
    let f = |mu2: f64| loss_relaxed(mu2, k, lambda1, lambda_n).expect("mu2 within interval");
    Ok(golden_section_min(
        f,
        lambda_n,
        lambda_n_minus_1,
        1e-10 * lambda_n_minus_1,
    ))
}

/// Largest cut s with λ_1/λ_s at or below `kappa_target`, i.e. the cut that
/// modifies as few modes as possible while the retained range meets the
/// conditioning target. Returns n when no modification is needed.
pub fn select_cut(eigenvalues: &DVector<f64>, kappa_target: f64) -> Result<usize> {
    let n = eigenvalues.len();
    if n == 0 {
        return Err(Error::EmptyInput("select_cut"));
    }
    let lambda1 = eigenvalues[0];
    if !(lambda1 > 0.0) {
        return Err(Error::Singular("select_cut requires λ_1 > 0"));
    }
    let mut s = 1;
    for i in 1..n {
        let l = eigenvalues[i];
        if l > 0.0 && lambda1 / l <= kappa_target {
            s = i + 1;
        } else {
            break;
        }
    }
    Ok(s)
}

/// How μ² is chosen when a plan is resolved against a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mu2Setting {
    /// A-priori optimal value for the requested order k.
    Auto,
    /// Explicit value.
    Value(f64),
    /// The upper end λ_s of the admissible interval (λ_{n-1} for the
    /// default cut), the configuration used for the route comparisons.
    SecondSmallest,
}

/// How ω is chosen when a plan is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OmegaSetting {
    Zero,
    /// Smallest eigenvalue of `R(AᵀA+R)⁻¹` over the modified modes.
    LambdaMin,
    Value(f64),
}

/// How the relaxation cut s is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CutSetting {
    /// s = n−1: modify only the smallest eigenvalue (the default).
    SmallestOnly,
    /// Largest s with λ_1/λ_s ≤ the given condition-number target.
    Auto { kappa_target: f64 },
    /// Explicit cut.
    At(usize),
}

/// A solver request with possibly unresolved (auto) parameters. Resolution
/// against the spectrum of `AᵀA` produces a concrete [`ResolvedMethod`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub method: MethodTag,
    pub k: usize,
    pub mu2: Mu2Setting,
    pub omega: Option<OmegaSetting>,
    pub cut: CutSetting,
    /// Number of trailing spectral components dropped by TSVD.
    pub truncate: usize,
}

impl PlanRequest {
    pub fn ls() -> Self {
        PlanRequest {
            method: MethodTag::Ls,
            k: 0,
            mu2: Mu2Setting::Value(0.0),
            omega: None,
            cut: CutSetting::SmallestOnly,
            truncate: 0,
        }
    }

    pub fn tikhonov(mu2: f64) -> Self {
        PlanRequest {
            method: MethodTag::Tr,
            mu2: Mu2Setting::Value(mu2),
            ..Self::ls()
        }
    }

    pub fn tsvd(truncate: usize) -> Self {
        PlanRequest {
            method: MethodTag::Tsvd,
            truncate,
            ..Self::ls()
        }
    }

    pub fn ftr(mu2: f64) -> Self {
        PlanRequest {
            method: MethodTag::Ftr,
            mu2: Mu2Setting::Value(mu2),
            ..Self::ls()
        }
    }

    pub fn oftr() -> Self {
        PlanRequest {
            method: MethodTag::Oftr,
            mu2: Mu2Setting::Auto,
            ..Self::ls()
        }
    }

    pub fn hr(k: usize) -> Self {
        PlanRequest {
            method: MethodTag::Hr,
            k,
            mu2: Mu2Setting::Auto,
            ..Self::ls()
        }
    }

    pub fn with_mu2(mut self, mu2: Mu2Setting) -> Self {
        self.mu2 = mu2;
        self
    }

    pub fn with_omega(mut self, omega: OmegaSetting) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_cut(mut self, cut: CutSetting) -> Self {
        self.cut = cut;
        self
    }

    /// Resolve every auto parameter against the spectrum of `AᵀA`.
    pub fn resolve(&self, spec: &SpectralDecomposition) -> Result<ResolvedMethod> {
        let n = spec.dim();
        match self.method {
            MethodTag::Ls => Ok(ResolvedMethod::LeastSquares),
            MethodTag::Tsvd => {
                if self.truncate >= n {
                    return Err(Error::InvalidArgument(format!(
                        "tsvd truncate count {} must be below the dimension {n}",
                        self.truncate
                    )));
                }
                Ok(ResolvedMethod::Tsvd {
                    truncate: self.truncate,
                })
            }
            MethodTag::Tr => {
                let mu2 = match self.mu2 {
                    Mu2Setting::Value(v) => v,
                    _ => {
                        return Err(Error::InvalidArgument(
                            "method tr requires an explicit mu2 (the a-priori criterion \
                             selects parameters for the relaxed family; use oftr or hr)"
                                .into(),
                        ))
                    }
                };
                let mut plan = RegularizationPlan::tikhonov_with_order(n, mu2, self.k)?;
                if let Some(omega) = self.omega {
                    let resolved = resolve_omega(omega, spec, &plan)?;
                    plan = plan.with_omega(resolved);
                }
                Ok(ResolvedMethod::Series(plan))
            }
            MethodTag::Ftr | MethodTag::Oftr | MethodTag::Hr => {
                let s = self.resolve_cut(spec)?;
                let lambda1 = spec.largest();
                let lambda_n = spec.smallest();
                let interval_hi = spec.eigenvalues()[s - 1];
                let interval_lo = if s < n {
                    spec.eigenvalues()[s]
                } else {
                    lambda_n
                };
                let mu2 = match (self.method, self.mu2) {
                    (_, Mu2Setting::SecondSmallest) => interval_hi,
                    (MethodTag::Ftr, Mu2Setting::Value(v)) => v,
                    (MethodTag::Ftr, Mu2Setting::Auto) => {
                        return Err(Error::InvalidArgument(
                            "method ftr requires an explicit mu2; oftr is the auto variant"
                                .into(),
                        ))
                    }
                    (MethodTag::Oftr, Mu2Setting::Auto) => {
                        if !(lambda_n > 0.0) {
                            return Err(Error::Singular("auto mu2 requires λ_n > 0"));
                        }
                        (2.0 * lambda1 / lambda_n)
                            .sqrt()
                            .clamp(interval_lo, interval_hi)
                    }
                    (MethodTag::Oftr, Mu2Setting::Value(_)) => {
                        return Err(Error::InvalidArgument(
                            "method oftr computes mu2 from the a-priori criterion; \
                             use ftr for an explicit value"
                                .into(),
                        ))
                    }
                    (MethodTag::Hr, Mu2Setting::Value(v)) => v,
                    (MethodTag::Hr, Mu2Setting::Auto) => {
                        if !(lambda_n > 0.0) {
                            return Err(Error::Singular("auto mu2 requires λ_n > 0"));
                        }
                        match self.k {
                            0 => (2.0 * lambda1 / lambda_n)
                                .sqrt()
                                .clamp(interval_lo, interval_hi),
                            1 => (lambda_n * lambda_n + lambda_n * lambda1)
                                .sqrt()
                                .clamp(interval_lo, interval_hi),
                            k => {
                                let f = |mu2: f64| {
                                    loss_relaxed(mu2, k, lambda1, lambda_n)
                                        .expect("mu2 within interval")
                                };
                                golden_section_min(
                                    f,
                                    interval_lo,
                                    interval_hi,
                                    1e-10 * interval_hi,
                                )
                            }
                        }
                    }
                    _ => unreachable!("series methods handled above"),
                };
                let k = if self.method == MethodTag::Hr { self.k } else { 0 };
                let mut plan =
                    RegularizationPlan::relaxed(spec, s, mu2, k)?.with_method_tag(self.method);
                if let Some(omega) = self.omega {
                    let resolved = resolve_omega(omega, spec, &plan)?;
                    plan = plan.with_omega(resolved);
                }
                Ok(ResolvedMethod::Series(plan))
            }
        }
    }

    fn resolve_cut(&self, spec: &SpectralDecomposition) -> Result<usize> {
        let n = spec.dim();
        match self.cut {
            CutSetting::SmallestOnly => Ok((n - 1).max(1)),
            CutSetting::Auto { kappa_target } => select_cut(spec.eigenvalues(), kappa_target),
            CutSetting::At(s) => {
                if s == 0 || s > n {
                    Err(Error::InvalidArgument(format!(
                        "relaxation cut s = {s} outside 1..={n}"
                    )))
                } else {
                    Ok(s)
                }
            }
        }
    }
}

fn resolve_omega(
    setting: OmegaSetting,
    spec: &SpectralDecomposition,
    plan: &RegularizationPlan,
) -> Result<f64> {
    Ok(match setting {
        OmegaSetting::Zero => 0.0,
        OmegaSetting::Value(v) => v,
        OmegaSetting::LambdaMin => {
            // θ_i = λ_{R,i} / (λ_i + λ_{R,i}) over the modified modes.
            let mut min_theta = f64::INFINITY;
            for &l in spec.eigenvalues().iter() {
                let lr = match plan.form() {
                    RegularizationForm::Zero => 0.0,
                    RegularizationForm::Identity => plan.mu2(),
                    RegularizationForm::Relaxed => (plan.mu2() - l).max(0.0),
                };
                if lr > 0.0 {
                    min_theta = min_theta.min(lr / (l + lr));
                }
            }
            if min_theta.is_finite() {
                min_theta
            } else {
                0.0
            }
        }
    })
}

/// A plan with every parameter pinned, ready to dispatch to a solver.
#[derive(Debug, Clone)]
pub enum ResolvedMethod {
    LeastSquares,
    Tsvd { truncate: usize },
    Series(RegularizationPlan),
}

impl ResolvedMethod {
    /// The realized μ², when the method carries one.
    pub fn mu2(&self) -> Option<f64> {
        match self {
            ResolvedMethod::Series(plan) => Some(plan.mu2()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eig_sym, max_abs};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectrum_of(diag: &[f64]) -> SpectralDecomposition {
        eig_sym(&DMatrix::from_diagonal(&DVector::from_row_slice(diag))).unwrap()
    }

    #[test]
    fn relaxed_r_is_zero_when_mu2_below_smallest() {
        let spec = spectrum_of(&[3.0, 2.0, 1.0]);
        let r = build_relaxed_r(&spec, 0.5);
        assert!(max_abs(&r) < 1e-14);
    }

    #[test]
    fn relaxed_r_diagonal_example() {
        let spec = spectrum_of(&[1.0, 0.01]);
        let r = build_relaxed_r(&spec, 1.0);
        let r_spec = eig_sym(&r).unwrap();
        assert_relative_eq!(r_spec.eigenvalues()[0], 0.99, max_relative = 1e-12);
        assert!(r_spec.eigenvalues()[1].abs() < 1e-14);
    }

    #[test]
    fn relaxed_r_raises_trailing_eigenvalues_to_lambda_s() {
        // μ² = λ_s turns AᵀA + R into diag(λ_1, …, λ_{s-1}, λ_s, …, λ_s).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() - 0.5);
        let n_mat = &g * g.transpose();
        let spec = eig_sym(&n_mat).unwrap();
        let s = 3;
        let mu2 = spec.eigenvalues()[s - 1];
        let sum = &n_mat + build_relaxed_r(&spec, mu2);
        let new_spec = eig_sym(&sum).unwrap();
        for i in 0..s - 1 {
            assert_relative_eq!(
                new_spec.eigenvalues()[i],
                spec.eigenvalues()[i],
                max_relative = 1e-9
            );
        }
        for i in s - 1..5 {
            assert_relative_eq!(new_spec.eigenvalues()[i], mu2, max_relative = 1e-9);
        }
    }

    #[test]
    fn relaxed_r_commutes_with_normal_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let g = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
            let n_mat = &g * g.transpose();
            let spec = eig_sym(&n_mat).unwrap();
            let mu2 = spec.second_smallest();
            let r = build_relaxed_r(&spec, mu2);
            let comm = &r * &n_mat - &n_mat * &r;
            let scale = max_abs(&n_mat) * max_abs(&r);
            assert!(max_abs(&comm) <= 1e-9 * (1.0 + scale));
        }
    }

    #[test]
    fn tikhonov_r_examples() {
        assert!(max_abs(&build_tikhonov_r(3, 0.0)) == 0.0);
        let r = build_tikhonov_r(2, 0.5);
        assert_eq!(r, DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5])));
    }

    #[test]
    fn optimal_mu2_k0_examples() {
        // Degenerate well-conditioned interval.
        assert_eq!(optimal_mu2_k0(1.0, 1.0, 1.0).unwrap(), 1.0);
        // Raw value 141.42 clamps to the upper end.
        assert_relative_eq!(
            optimal_mu2_k0(100.0, 50.0, 0.01).unwrap(),
            50.0,
            max_relative = 1e-12
        );
        // Raw value lands exactly on the lower end.
        assert_relative_eq!(optimal_mu2_k0(4.0, 3.5, 2.0).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn optimal_mu2_k0_rejects_bad_ordering() {
        assert!(optimal_mu2_k0(1.0, 2.0, 3.0).is_err());
        assert!(optimal_mu2_k0(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn optimal_mu2_k1_examples() {
        assert_eq!(optimal_mu2_k1(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            optimal_mu2_k1(100.0, 50.0, 0.01).unwrap(),
            (0.0001_f64 + 1.0).sqrt(),
            max_relative = 1e-12
        );
        // The closed form never drops below λ_n.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let ln = rng.random::<f64>() + 1e-6;
            let l1 = ln * (1.0 + rng.random::<f64>() * 100.0);
            let ln1 = ln + (l1 - ln) * rng.random::<f64>();
            let mu2 = optimal_mu2_k1(l1, ln1, ln).unwrap();
            assert!(mu2 >= ln * (1.0 - 1e-15));
            assert!(mu2 <= ln1 * (1.0 + 1e-15));
        }
    }

    #[test]
    fn loss_relaxed_examples() {
        // μ² = λ_n leaves only the condition-number term.
        assert_relative_eq!(
            loss_relaxed(0.01, 3, 100.0, 0.01).unwrap(),
            10000.0,
            max_relative = 1e-12
        );
        // k = 0 arithmetic: (2−1)/1 + 2/2 = 2.
        assert_relative_eq!(loss_relaxed(2.0, 0, 2.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        // The k = 1 closed-form minimizer beats its ±10% neighbors.
        let (l1, ln) = (100.0, 0.01);
        let mu2 = optimal_mu2_k1(l1, 50.0, ln).unwrap();
        let at = loss_relaxed(mu2, 1, l1, ln).unwrap();
        assert!(at <= loss_relaxed(mu2 * 1.1, 1, l1, ln).unwrap());
        assert!(at <= loss_relaxed(mu2 * 0.9, 1, l1, ln).unwrap());
    }

    #[test]
    fn loss_relaxed_rejects_mu2_below_lambda_n() {
        assert!(loss_relaxed(0.5, 0, 2.0, 1.0).is_err());
    }

    #[test]
    fn loss_relaxed_is_convex_on_sampled_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let ln = 10f64.powf(rng.random::<f64>() * -6.0);
            let l1 = ln * 10f64.powf(rng.random::<f64>() * 6.0);
            let ln1 = ln + (l1 - ln) * rng.random::<f64>();
            let k = rng.random_range(0..6);
            let a = ln + (ln1 - ln) * rng.random::<f64>();
            let b = ln + (ln1 - ln) * rng.random::<f64>();
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let mid = 0.5 * (a + b);
            let fa = loss_relaxed(a, k, l1, ln).unwrap();
            let fb = loss_relaxed(b, k, l1, ln).unwrap();
            let fm = loss_relaxed(mid, k, l1, ln).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-9 * (1.0 + fa.abs() + fb.abs()));
        }
    }

    #[test]
    fn golden_section_matches_k1_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let ln = 10f64.powf(rng.random::<f64>() * -7.0);
            let l1 = ln * 10f64.powf(rng.random::<f64>() * 7.0 + 0.2);
            let ln1 = ln * (l1 / ln).powf(rng.random::<f64>());
            let closed = optimal_mu2_k1(l1, ln1, ln).unwrap();
            let searched = optimal_mu2_general(1, l1, ln1, ln).unwrap();
            assert_relative_eq!(searched, closed, max_relative = 1e-6);
        }
    }

    #[test]
    fn golden_section_matches_k0_calculus_minimizer() {
        // The true constrained argmin of the k = 0 loss is √(λ_1 λ_n) clamped
        // into [λ_n, λ_{n-1}].
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let ln = 10f64.powf(rng.random::<f64>() * -7.0);
            let l1 = ln * 10f64.powf(rng.random::<f64>() * 7.0 + 0.2);
            let ln1 = ln * (l1 / ln).powf(rng.random::<f64>());
            let closed = (l1 * ln).sqrt().clamp(ln, ln1);
            let searched = optimal_mu2_general(0, l1, ln1, ln).unwrap();
            assert_relative_eq!(searched, closed, max_relative = 1e-6);
        }
    }

    #[test]
    fn oftr_parameter_differs_from_k0_loss_minimizer_on_spread_spectra() {
        // The k = 0 closed form used by OFTR is a fixed scale-free expression;
        // on a spread spectrum it does not coincide with the loss minimizer,
        // and the minimizer never loses.
        let (l1, ln1, ln) = (100.0, 50.0, 0.01);
        let oftr = optimal_mu2_k0(l1, ln1, ln).unwrap();
        let minimizer = optimal_mu2_general(0, l1, ln1, ln).unwrap();
        let loss_oftr = loss_relaxed(oftr, 0, l1, ln).unwrap();
        let loss_min = loss_relaxed(minimizer, 0, l1, ln).unwrap();
        assert!(loss_min < loss_oftr);
        assert!((oftr - minimizer).abs() > 1.0);
    }

    #[test]
    fn golden_section_beats_uniform_grid_for_high_order() {
        let (l1, ln1, ln) = (100.0, 30.0, 0.01);
        let k = 10;
        let mu2 = optimal_mu2_general(k, l1, ln1, ln).unwrap();
        let best = loss_relaxed(mu2, k, l1, ln).unwrap();
        for i in 0..=20 {
            let g = ln + (ln1 - ln) * i as f64 / 20.0;
            assert!(best <= loss_relaxed(g, k, l1, ln).unwrap() + 1e-9);
        }
    }

    #[test]
    fn degenerate_interval_returns_lambda_n() {
        assert_eq!(optimal_mu2_general(4, 10.0, 0.5, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn select_cut_picks_largest_admissible() {
        let eigs = DVector::from_vec(vec![100.0, 10.0, 0.001]);
        assert_eq!(select_cut(&eigs, 1e3).unwrap(), 2);
        let ok = DVector::from_vec(vec![5.0, 4.0, 3.0]);
        assert_eq!(select_cut(&ok, 1e3).unwrap(), 3);
        let all_bad = DVector::from_vec(vec![1.0, 1e-9, 1e-12]);
        assert_eq!(select_cut(&all_bad, 1e3).unwrap(), 1);
    }

    #[test]
    fn plan_request_auto_mu2_matches_closed_forms() {
        let spec = spectrum_of(&[100.0, 50.0, 0.01]);
        let resolved = PlanRequest::hr(1).resolve(&spec).unwrap();
        assert_relative_eq!(
            resolved.mu2().unwrap(),
            optimal_mu2_k1(100.0, 50.0, 0.01).unwrap(),
            max_relative = 1e-12
        );
        let resolved = PlanRequest::oftr().resolve(&spec).unwrap();
        assert_relative_eq!(
            resolved.mu2().unwrap(),
            optimal_mu2_k0(100.0, 50.0, 0.01).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn plan_request_second_smallest_setting() {
        let spec = spectrum_of(&[100.0, 50.0, 0.01]);
        let resolved = PlanRequest::hr(1)
            .with_mu2(Mu2Setting::SecondSmallest)
            .resolve(&spec)
            .unwrap();
        assert_eq!(resolved.mu2().unwrap(), 50.0);
    }

    #[test]
    fn plan_request_tr_requires_explicit_mu2() {
        let spec = spectrum_of(&[2.0, 1.0]);
        let req = PlanRequest {
            mu2: Mu2Setting::Auto,
            ..PlanRequest::tikhonov(1.0)
        };
        assert!(req.resolve(&spec).is_err());
    }

    #[test]
    fn plan_relaxed_rejects_mu2_above_cut() {
        let spec = spectrum_of(&[3.0, 2.0, 1.0]);
        assert!(RegularizationPlan::relaxed(&spec, 2, 2.5, 1).is_err());
        assert!(RegularizationPlan::relaxed(&spec, 2, 2.0, 1).is_ok());
    }

    #[test]
    fn resolve_omega_lambda_min_for_identity_form() {
        // For R = μ²I the smallest θ lives on the largest eigenvalue.
        let spec = spectrum_of(&[4.0, 1.0]);
        let resolved = PlanRequest::tikhonov(1.0)
            .with_omega(OmegaSetting::LambdaMin)
            .resolve(&spec)
            .unwrap();
        let ResolvedMethod::Series(plan) = resolved else {
            panic!("expected series plan")
        };
        assert_relative_eq!(plan.omega().unwrap(), 1.0 / 5.0, max_relative = 1e-12);
    }
}
