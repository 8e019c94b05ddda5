//! Simulation scenarios, RMSE metrics, and trajectory alignment.
//!
//! A [`Scenario`] is a deterministic experiment: an anchor geometry, a list
//! of true positions, a range-noise level, and a seed. [`run_scenario`]
//! replays it once per configured method on a shared measurement stream, so
//! method comparisons see identical noise. Noise is applied to the measured
//! distances (where the physical error enters), not to the assembled
//! right-hand side.
//!
//! Per-point solves are independent; the sliding-window correction path is
//! inherently sequential in time, so parallelism is only used across whole
//! scenarios (see [`run_scenarios_parallel`]).

use nalgebra::{DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias_correction::{batch_bias, SlidingWindow};
use crate::error::{Error, Result};
use crate::error_analysis::hr_bias;
use crate::localization::{build_system, AnchorSet, RangeMeasurement};
use crate::regularization::{MethodTag, PlanRequest, ResolvedMethod};
use crate::solvers::solve_with;
use crate::spectral::{eig_sym, normal_matrix};

/// Axis-aligned sampling box.
#[derive(Debug, Clone, Copy)]
pub struct Box3 {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Box3 {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::InvalidScenario(format!(
                "degenerate box: min {:?} must be strictly below max {:?}",
                min, max
            )));
        }
        Ok(Box3 { min, max })
    }
}

/// A deterministic localization experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub anchors: AnchorSet,
    pub truth: Vec<Vector3<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn trials(&self) -> usize {
        self.truth.len()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(format!(
            "noise sigma must be finite and nonnegative, got {sigma}"
        )))
    }
}

/// `count` i.i.d. uniform positions in the box, deterministic under `seed`.
pub fn random_points_scenario(
    bounds: &Box3,
    count: usize,
    anchors: AnchorSet,
    sigma: f64,
    seed: u64,
) -> Result<Scenario> {
    if count == 0 {
        return Err(Error::InvalidScenario(
            "random-points scenario needs at least one point".into(),
        ));
    }
    check_sigma(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axis = |lo: f64, hi: f64| lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng);
    let truth = (0..count)
        .map(|_| {
            Vector3::new(
                axis(bounds.min.x, bounds.max.x),
                axis(bounds.min.y, bounds.max.y),
                axis(bounds.min.z, bounds.max.z),
            )
        })
        .collect();
    Ok(Scenario {
        anchors,
        truth,
        noise_sigma: sigma,
        seed,
    })
}

/// Piecewise-linear route sampled at arc-length steps.
pub fn route_scenario(
    anchors: AnchorSet,
    waypoints: &[Vector3<f64>],
    step: f64,
    sigma: f64,
    seed: u64,
) -> Result<Scenario> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidScenario(
            "route needs at least two waypoints".into(),
        ));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidScenario(format!(
            "route step must be positive, got {step}"
        )));
    }
    check_sigma(sigma)?;
    let mut segment_lengths = Vec::with_capacity(waypoints.len() - 1);
    for pair in waypoints.windows(2) {
        let len = (pair[1] - pair[0]).norm();
        if len == 0.0 {
            return Err(Error::InvalidScenario(
                "route contains coincident consecutive waypoints".into(),
            ));
        }
        segment_lengths.push(len);
    }
    let total: f64 = segment_lengths.iter().sum();
    let samples = (total / step + 1e-9).floor() as usize + 1;
    let mut truth = Vec::with_capacity(samples);
    for i in 0..samples {
        let target = (i as f64 * step).min(total);
        let mut remaining = target;
        let mut position = *waypoints.last().unwrap();
        for (seg, &len) in segment_lengths.iter().enumerate() {
            if remaining <= len {
                let t = remaining / len;
                position = waypoints[seg] + (waypoints[seg + 1] - waypoints[seg]) * t;
                break;
            }
            remaining -= len;
        }
        truth.push(position);
    }
    Ok(Scenario {
        anchors,
        truth,
        noise_sigma: sigma,
        seed,
    })
}

/// A static robot observed for `steps` measurement epochs.
pub fn stationary_scenario(
    anchors: AnchorSet,
    point: Vector3<f64>,
    steps: usize,
    sigma: f64,
    seed: u64,
) -> Result<Scenario> {
    if steps == 0 {
        return Err(Error::InvalidScenario(
            "stationary scenario needs at least one step".into(),
        ));
    }
    check_sigma(sigma)?;
    Ok(Scenario {
        anchors,
        truth: vec![point; steps],
        noise_sigma: sigma,
        seed,
    })
}

/// The default two-part route: a horizontal loop at z = 0.30 m followed by
/// a slope climbing to z = 0.80 m.
pub fn default_route_waypoints() -> Vec<Vector3<f64>> {
    vec![
        Vector3::new(1.0, 0.5, 0.30),
        Vector3::new(5.0, 0.5, 0.30),
        Vector3::new(5.0, 3.5, 0.30),
        Vector3::new(2.0, 3.5, 0.30),
        Vector3::new(1.0, 1.0, 0.80),
    ]
}

/// How a series method's estimates are bias-corrected during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// No correction; raw estimates are reported.
    None,
    /// Sliding-window correction: subtract the windowed mean of
    /// (series − LS) differences, active once the window has filled.
    Window,
    /// Batch correction: subtract the run-wide mean difference from every
    /// estimate after the run.
    Batch,
    /// Add the exact per-measurement bias vector (verification mode: this
    /// reproduces the LS estimate wherever LS is solvable).
    Exact,
}

/// A method entry for [`run_scenario`].
#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub request: PlanRequest,
    pub correction: Correction,
    /// Report label; derived from the method tag when absent.
    pub label: Option<String>,
}

impl MethodConfig {
    /// Default correction policy: series methods of order ≥ 1 run with the
    /// sliding window, everything else uncorrected.
    pub fn new(request: PlanRequest) -> Self {
        let correction = if request.method == MethodTag::Hr {
            Correction::Window
        } else {
            Correction::None
        };
        MethodConfig {
            request,
            correction,
            label: None,
        }
    }

    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Per-method results of a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub label: String,
    pub method: MethodTag,
    pub correction: Correction,
    /// Realized μ² (series methods only).
    pub mu2: Option<f64>,
    pub total_rmse: f64,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    pub mean_error: f64,
    pub max_error: f64,
    pub min_error: f64,
    /// Points where this method's solver failed (excluded from metrics).
    pub skipped: usize,
    /// Steps where the correction path had no LS solution to pair with.
    pub correction_skips: usize,
    #[serde(skip)]
    pub estimates: Vec<Option<Vector3<f64>>>,
}

/// Results of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub sigma: f64,
    pub points: usize,
    pub methods: Vec<MethodReport>,
}

fn vector_to_point(v: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Replay the scenario once per method on a shared measurement stream.
///
/// `window_len` sets the sliding-window capacity for methods configured with
/// [`Correction::Window`].
pub fn run_scenario(
    scenario: &Scenario,
    methods: &[MethodConfig],
    window_len: usize,
) -> Result<ScenarioReport> {
    if scenario.truth.is_empty() {
        return Err(Error::InvalidScenario("scenario has no truth points".into()));
    }
    if methods.is_empty() {
        return Err(Error::EmptyInput("run_scenario methods"));
    }
    check_sigma(scenario.noise_sigma)?;
    let uses_window = methods
        .iter()
        .any(|m| m.correction == Correction::Window);
    if uses_window && window_len == 0 {
        return Err(Error::InvalidArgument(
            "window correction requested with window length 0".into(),
        ));
    }

    // Shared measurement stream, deterministic under the scenario seed.
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = if scenario.noise_sigma > 0.0 {
        Some(Normal::new(0.0, scenario.noise_sigma).expect("finite sigma"))
    } else {
        None
    };
    let mut measurements = Vec::with_capacity(scenario.truth.len());
    for (tick, point) in scenario.truth.iter().enumerate() {
        let mut distances = scenario.anchors.true_distances(point);
        if let Some(noise) = &noise {
            for d in &mut distances {
                *d = (*d + noise.sample(&mut rng)).max(0.0);
            }
        }
        measurements.push(RangeMeasurement::new(distances, tick)?);
    }

    // Resolve the plans once: the design matrix (and so the spectrum) is
    // fixed by the anchor geometry.
    let probe = build_system(&scenario.anchors, &measurements[0])?;
    let spec = eig_sym(&normal_matrix(&probe))?;
    let mut resolved: Vec<(String, ResolvedMethod, Correction)> = Vec::new();
    for config in methods {
        let method = config.request.resolve(&spec)?;
        let base_label = config
            .label
            .clone()
            .unwrap_or_else(|| config.request.method.as_str().to_string());
        let mut label = base_label.clone();
        let mut suffix = 2;
        while resolved.iter().any(|(l, _, _)| *l == label) {
            label = format!("{base_label}#{suffix}");
            suffix += 1;
        }
        // Correction modes need a series plan to pair against LS.
        let correction = match method {
            ResolvedMethod::Series(_) => config.correction,
            _ => Correction::None,
        };
        resolved.push((label, method, correction));
    }

    let systems: Vec<_> = measurements
        .iter()
        .map(|m| build_system(&scenario.anchors, m))
        .collect::<Result<_>>()?;

    // LS estimates are shared by every correction path.
    let needs_ls = resolved
        .iter()
        .any(|(_, _, c)| matches!(c, Correction::Window | Correction::Batch));
    let ls_estimates: Vec<Option<DVector<f64>>> = if needs_ls {
        systems
            .iter()
            .map(|s| crate::solvers::solve_ls(s).ok().map(|o| o.estimate))
            .collect()
    } else {
        Vec::new()
    };

    let mut reports = Vec::with_capacity(resolved.len());
    for (label, method, correction) in &resolved {
        let mut estimates: Vec<Option<Vector3<f64>>> = Vec::with_capacity(systems.len());
        let mut skipped = 0usize;
        let mut correction_skips = 0usize;
        let mut window = if *correction == Correction::Window {
            Some(SlidingWindow::new(window_len, 3)?)
        } else {
            None
        };
        let mut batch_pairs: Vec<(usize, DVector<f64>)> = Vec::new();
        let mut raw_for_batch: Vec<DVector<f64>> = Vec::new();

        for (t, system) in systems.iter().enumerate() {
            let outcome = match solve_with(system, method) {
                Ok(outcome) => outcome,
                Err(_) => {
                    skipped += 1;
                    estimates.push(None);
                    continue;
                }
            };
            let raw = outcome.estimate;
            match correction {
                Correction::None => estimates.push(Some(vector_to_point(&raw))),
                Correction::Window => {
                    let window = window.as_mut().expect("window allocated");
                    if let Some(ls) = &ls_estimates[t] {
                        window.push(&raw - ls)?;
                    } else {
                        correction_skips += 1;
                    }
                    let corrected = window.correct(&raw)?;
                    estimates.push(Some(vector_to_point(&corrected)));
                }
                Correction::Batch => {
                    if let Some(ls) = &ls_estimates[t] {
                        batch_pairs.push((estimates.len(), ls.clone()));
                        raw_for_batch.push(raw.clone());
                    } else {
                        correction_skips += 1;
                    }
                    estimates.push(Some(vector_to_point(&raw)));
                }
                Correction::Exact => {
                    let ResolvedMethod::Series(plan) = method else {
                        unreachable!("correction forced to None for non-series methods")
                    };
                    match hr_bias(system, plan) {
                        Ok(bias) => estimates.push(Some(vector_to_point(&(&raw + bias)))),
                        Err(_) => {
                            correction_skips += 1;
                            estimates.push(Some(vector_to_point(&raw)));
                        }
                    }
                }
            }
        }

        if *correction == Correction::Batch && !raw_for_batch.is_empty() {
            let ls_list: Vec<DVector<f64>> =
                batch_pairs.iter().map(|(_, ls)| ls.clone()).collect();
            let delta = batch_bias(&raw_for_batch, &ls_list)?;
            let shift = vector_to_point(&delta);
            for e in estimates.iter_mut().flatten() {
                *e -= shift;
            }
        }

        let paired: (Vec<Vector3<f64>>, Vec<Vector3<f64>>) = estimates
            .iter()
            .zip(&scenario.truth)
            .filter_map(|(e, t)| e.map(|e| (e, *t)))
            .unzip();
        if paired.0.is_empty() {
            return Err(Error::InvalidScenario(format!(
                "method {label} failed on every point"
            )));
        }
        let (total_rmse, per_dim) = rmse(&paired.0, &paired.1)?;
        let errors: Vec<f64> = paired
            .0
            .iter()
            .zip(&paired.1)
            .map(|(e, t)| (e - t).norm())
            .collect();
        let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
        let max_error = errors.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min_error = errors.iter().fold(f64::INFINITY, |a, &b| a.min(b));

        reports.push(MethodReport {
            label: label.clone(),
            method: match method {
                ResolvedMethod::LeastSquares => MethodTag::Ls,
                ResolvedMethod::Tsvd { .. } => MethodTag::Tsvd,
                ResolvedMethod::Series(plan) => plan.method(),
            },
            correction: *correction,
            mu2: method.mu2(),
            total_rmse,
            rmse_x: per_dim[0],
            rmse_y: per_dim[1],
            rmse_z: per_dim[2],
            mean_error,
            max_error,
            min_error,
            skipped,
            correction_skips,
            estimates,
        });
    }

    Ok(ScenarioReport {
        seed: scenario.seed,
        sigma: scenario.noise_sigma,
        points: scenario.truth.len(),
        methods: reports,
    })
}

/// Run independent scenarios in parallel (method passes inside each scenario
/// stay sequential: the window path depends on time order). Results are in
/// input order regardless of scheduling.
pub fn run_scenarios_parallel(
    scenarios: &[Scenario],
    methods: &[MethodConfig],
    window_len: usize,
) -> Result<Vec<ScenarioReport>> {
    scenarios
        .par_iter()
        .map(|s| run_scenario(s, methods, window_len))
        .collect()
}

/// Root-mean-square error, total and per axis.
pub fn rmse(estimates: &[Vector3<f64>], truth: &[Vector3<f64>]) -> Result<(f64, [f64; 3])> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("rmse"));
    }
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "rmse lists",
            expected: truth.len(),
            actual: estimates.len(),
        });
    }
    let n = estimates.len() as f64;
    let mut total = 0.0;
    let mut per_dim = [0.0; 3];
    for (e, t) in estimates.iter().zip(truth) {
        let d = e - t;
        total += d.norm_squared();
        for axis in 0..3 {
            per_dim[axis] += d[axis] * d[axis];
        }
    }
    Ok((
        (total / n).sqrt(),
        [
            (per_dim[0] / n).sqrt(),
            (per_dim[1] / n).sqrt(),
            (per_dim[2] / n).sqrt(),
        ],
    ))
}

/// A similarity transform `p ↦ scale·R·p + t`.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Least-squares alignment of `source` onto `target`: rotation and
/// translation, with the scale fixed at 1 unless `with_scale` is set
/// (range-based trajectories are already metric).
///
/// Returns the transform and the transformed source points.
pub fn umeyama_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    with_scale: bool,
) -> Result<(SimilarityTransform, Vec<Vector3<f64>>)> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "umeyama point lists",
            expected: target.len(),
            actual: source.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::EmptyInput("umeyama needs at least three points"));
    }
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Vector3<f64>>() / n;
    let mu_t = target.iter().sum::<Vector3<f64>>() / n;

    let mut covariance = Matrix3::zeros();
    let mut source_variance = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s - mu_s;
        let tc = t - mu_t;
        covariance += tc * sc.transpose();
        source_variance += sc.norm_squared();
    }
    covariance /= n;
    source_variance /= n;

    let svd = covariance.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let d = svd.singular_values;
    // Spread must be at least planar for a unique rotation.
    if d[1] <= 1e-12 * (1.0 + d[0]) {
        return Err(Error::DegenerateGeometry(
            "point cloud is collinear; alignment is not unique",
        ));
    }
    let mut s_diag = Vector3::new(1.0, 1.0, 1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s_diag.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s_diag) * v_t;
    let scale = if with_scale {
        (d[0] * s_diag.x + d[1] * s_diag.y + d[2] * s_diag.z) / source_variance
    } else {
        1.0
    };
    let translation = mu_t - scale * (rotation * mu_s);
    let transform = SimilarityTransform {
        rotation,
        translation,
        scale,
    };
    let aligned = source.iter().map(|p| transform.apply(p)).collect();
    Ok((transform, aligned))
}
