//! High-order regularization for ill-conditioned linear least-squares problems,
//! with a 3D anchor-based localization layer on top.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`spectral`] — symmetric eigen-analysis of the normal matrix `AᵀA`,
//!   condition numbers, and the spectral-radius contraction check.
//! - [`regularization`] — construction of regularization matrices (identity
//!   and relaxed forms) and a-priori selection of the regularization level μ².
//! - [`solvers`] — the estimator family: least squares, Tikhonov, truncated
//!   SVD, and the k-th order series solution with an optional ω adjustment.
//! - [`error_analysis`] — closed-form approximation residuals, exact bias
//!   vectors, error bounds, and the residual sandwich bounds.
//! - [`bias_correction`] — batch bias estimation and the sliding-window
//!   corrector for online use.
//! - [`localization`] — builds the linear system from anchor positions and
//!   range measurements and estimates positions with any configured solver.
//! - [`scenarios`] — seeded simulation scenarios, RMSE metrics, and Umeyama
//!   trajectory alignment.
//!
//! All numerical work is done on `nalgebra` dynamic matrices; problem sizes
//! are small (n ≤ 10 unknowns, a few dozen rows), so every inverse is taken
//! through an explicit symmetric eigendecomposition.

pub mod bias_correction;
pub mod error;
pub mod error_analysis;
pub mod localization;
pub mod regularization;
pub mod report;
pub mod scenarios;
pub mod solvers;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use localization::{AnchorSet, IllConditionReport, RangeMeasurement};
pub use regularization::{MethodTag, Mu2Setting, PlanRequest, RegularizationPlan};
pub use solvers::{LinearSystem, SolveOutcome};
pub use spectral::SpectralDecomposition;

pub use nalgebra::{DMatrix, DVector, Vector3};
