//! Anchor-based 3D localization: build the linear system from ranges and
//! estimate positions with any configured solver.
//!
//! With m+1 anchors `p_i` and measured distances `d_i`, differencing against
//! the reference anchor `p_ref` (the last one by default) gives the linear
//! model `Ax = b` with
//!
//! ```text
//! A_i = (p_i − p_ref)ᵀ
//! b_i = ½ (p_iᵀp_i − p_refᵀp_ref + d_ref² − d_i²)
//! ```
//!
//! Indoor geometries with little anchor height spread make the z column of A
//! small, which is exactly the ill-conditioned case the series solvers and
//! the relaxed regularization are for. [`ill_condition_report`] quantifies
//! that before any solving happens.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::regularization::{
    optimal_mu2_k0, optimal_mu2_k1, select_cut, PlanRequest, DEFAULT_CONDITION_TARGET,
};
use crate::solvers::{solve_with, LinearSystem, SolveOutcome};
use crate::spectral::{eig_sym, normal_matrix, RANK_REL_TOL};

/// Positions of m+1 anchors; the designated reference anchor is the one the
/// others are differenced against.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    positions: Vec<Vector3<f64>>,
    reference: usize,
}

impl AnchorSet {
    /// At least 4 anchors are required in 3D; the last one becomes the
    /// differencing reference.
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self> {
        let reference = positions.len().saturating_sub(1);
        Self::with_reference(positions, reference)
    }

    /// Choose a different reference anchor by index.
    pub fn with_reference(positions: Vec<Vector3<f64>>, reference: usize) -> Result<Self> {
        if positions.len() < 4 {
            return Err(Error::InsufficientAnchors {
                need: 4,
                have: positions.len(),
            });
        }
        if reference >= positions.len() {
            return Err(Error::InvalidArgument(format!(
                "reference index {reference} outside 0..{}",
                positions.len()
            )));
        }
        if positions
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::NonFinite("anchor positions"));
        }
        Ok(AnchorSet {
            positions,
            reference,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn reference_index(&self) -> usize {
        self.reference
    }

    /// The m×3 design matrix with rows `p_i − p_ref` (reference row omitted,
    /// original order otherwise preserved).
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let p_ref = self.positions[self.reference];
        let rows = self.len() - 1;
        let mut a = DMatrix::zeros(rows, 3);
        let mut row = 0;
        for (i, p) in self.positions.iter().enumerate() {
            if i == self.reference {
                continue;
            }
            let d = p - p_ref;
            a[(row, 0)] = d.x;
            a[(row, 1)] = d.y;
            a[(row, 2)] = d.z;
            row += 1;
        }
        a
    }

    /// Exact anchor-to-point distances, in anchor order (simulation input).
    pub fn true_distances(&self, point: &Vector3<f64>) -> Vec<f64> {
        self.positions.iter().map(|p| (p - point).norm()).collect()
    }
}

/// One epoch of range measurements, aligned with the anchor order.
#[derive(Debug, Clone)]
pub struct RangeMeasurement {
    distances: Vec<f64>,
    tick: usize,
}

impl RangeMeasurement {
    pub fn new(distances: Vec<f64>, tick: usize) -> Result<Self> {
        for (index, &value) in distances.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("distances"));
            }
            if value < 0.0 {
                return Err(Error::NegativeDistance { value, index });
            }
        }
        Ok(RangeMeasurement { distances, tick })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn tick(&self) -> usize {
        self.tick
    }
}

/// Assemble the localization system for one measurement epoch.
pub fn build_system(anchors: &AnchorSet, ranges: &RangeMeasurement) -> Result<LinearSystem> {
    if ranges.distances.len() != anchors.len() {
        return Err(Error::DimensionMismatch {
            context: "range measurement",
            expected: anchors.len(),
            actual: ranges.distances.len(),
        });
    }
    let a = anchors.design_matrix();
    let p_ref = anchors.positions[anchors.reference];
    let d_ref = ranges.distances[anchors.reference];
    let ref_term = p_ref.norm_squared() - d_ref * d_ref;
    let mut b = DVector::zeros(anchors.len() - 1);
    let mut row = 0;
    for (i, p) in anchors.positions.iter().enumerate() {
        if i == anchors.reference {
            continue;
        }
        let d_i = ranges.distances[i];
        b[row] = 0.5 * (p.norm_squared() - ref_term - d_i * d_i);
        row += 1;
    }
    LinearSystem::new(a, b)
}

/// Build the system for one measurement, resolve any auto parameters in the
/// request against the anchor geometry, and dispatch to the solver.
pub fn locate(
    anchors: &AnchorSet,
    ranges: &RangeMeasurement,
    request: &PlanRequest,
) -> Result<SolveOutcome> {
    let system = build_system(anchors, ranges)?;
    let spec = eig_sym(&normal_matrix(&system))?;
    let resolved = request.resolve(&spec)?;
    solve_with(&system, &resolved)
}

/// Conditioning diagnostics for an anchor geometry.
#[derive(Debug, Clone, Serialize)]
pub struct IllConditionReport {
    /// Norms of the design-matrix columns (Δx, Δy, Δz): a column much
    /// smaller than the others marks the weakly observed dimension.
    pub column_norms: [f64; 3],
    /// Eigenvalues of AᵀA, descending.
    pub eigenvalues: Vec<f64>,
    /// λ_1/λ_n; infinite when the geometry is rank deficient.
    pub condition_number: f64,
    /// Numeric rank of AᵀA (3 for sound geometries).
    pub rank: usize,
    /// Largest relaxation cut meeting the default condition target.
    pub suggested_s: usize,
    /// Whether regularization is needed to reach the default target.
    pub regularization_needed: bool,
    /// A-priori μ² suggestions for orders 0 and 1 (absent when the geometry
    /// is rank deficient or already well conditioned).
    pub suggested_mu2_k0: Option<f64>,
    pub suggested_mu2_k1: Option<f64>,
}

/// Analyze an anchor geometry without any measurements: per-column norms,
/// the spectrum of AᵀA, the suggested relaxation cut, and a-priori μ²
/// values for orders 0 and 1.
pub fn ill_condition_report(anchors: &AnchorSet) -> Result<IllConditionReport> {
    let a = anchors.design_matrix();
    let column_norms = [a.column(0).norm(), a.column(1).norm(), a.column(2).norm()];
    let n_mat = a.transpose() * &a;
    let spec = eig_sym(&n_mat)?;
    let rank = spec.numeric_rank();
    let condition_number = if spec.smallest() > RANK_REL_TOL * spec.largest() {
        spec.largest() / spec.smallest()
    } else {
        f64::INFINITY
    };
    let suggested_s = select_cut(spec.eigenvalues(), DEFAULT_CONDITION_TARGET)?;
    let regularization_needed = suggested_s < spec.dim();
    let (suggested_mu2_k0, suggested_mu2_k1) = if rank == 3 && regularization_needed {
        let (l1, ln1, ln) = (
            spec.largest(),
            spec.second_smallest(),
            spec.smallest(),
        );
        (
            Some(optimal_mu2_k0(l1, ln1, ln)?),
            Some(optimal_mu2_k1(l1, ln1, ln)?),
        )
    } else {
        (None, None)
    };
    Ok(IllConditionReport {
        column_norms,
        eigenvalues: spec.eigenvalues().iter().copied().collect(),
        condition_number,
        rank,
        suggested_s,
        regularization_needed,
        suggested_mu2_k0,
        suggested_mu2_k1,
    })
}

/// The four-anchor geometry used in the reference experiments (meters);
/// the last anchor is the differencing reference.
pub fn reference_experiment_anchors() -> AnchorSet {
    AnchorSet::new(vec![
        Vector3::new(0.0, 0.0, 2.29),
        Vector3::new(5.30, 4.12, 1.20),
        Vector3::new(-0.56, 2.01, 0.30),
        Vector3::new(6.00, 0.0, 1.20),
    ])
    .expect("valid anchor geometry")
}
