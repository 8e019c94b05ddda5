//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two inputs that must agree in size do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A matrix that must be symmetric is not, beyond the numerical tolerance.
    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    /// A matrix that must be invertible (or positive definite) is numerically singular.
    #[error("singular matrix: {0}")]
    Singular(&'static str),

    /// The series contraction requirement ρ < 1 is violated.
    #[error("spectral radius {rho:.6} violates the contraction requirement (must be < 1)")]
    SpectralRadiusViolation { rho: f64 },

    /// The adjustment parameter ω is outside [0, λ_max].
    #[error("adjustment parameter ω = {omega} outside the admissible range [0, {max}]")]
    OmegaOutOfRange { omega: f64, max: f64 },

    /// Eigenvalue arguments do not satisfy 0 < λ_n ≤ λ_{n-1} ≤ λ_1.
    #[error("invalid spectrum ordering: need 0 < λ_n ≤ λ_(n-1) ≤ λ_1, got λ_1={lambda1}, λ_(n-1)={lambda_n_minus_1}, λ_n={lambda_n}")]
    InvalidSpectrum {
        lambda1: f64,
        lambda_n_minus_1: f64,
        lambda_n: f64,
    },

    /// A scalar argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix entries must be finite.
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    /// Input collection is empty where data is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Localization needs at least n+1 = 4 anchors in 3D.
    #[error("insufficient anchors: need at least {need}, got {have}")]
    InsufficientAnchors { need: usize, have: usize },

    /// Distances must be nonnegative.
    #[error("negative distance {value} at index {index}")]
    NegativeDistance { value: f64, index: usize },

    /// Point cloud or anchor geometry is too degenerate for the operation.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    /// Scenario configuration is unusable.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// The two commuting factors of the closed-form residual failed their
    /// consistency check; indicates corrupted inputs.
    #[error("commutation check failed: deviation {deviation:.3e}")]
    CommutationCheck { deviation: f64 },
}
