//! JSON configuration schemas for `simulate` and `sweep`, and their mapping
//! onto library types.

use anyhow::{bail, Context};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use hireg::regularization::{CutSetting, MethodTag, Mu2Setting, OmegaSetting, PlanRequest};
use hireg::scenarios::{
    default_route_waypoints, random_points_scenario, route_scenario, stationary_scenario, Box3,
    Correction, MethodConfig, Scenario,
};
use hireg::AnchorSet;

fn default_window() -> usize {
    hireg::bias_correction::DEFAULT_WINDOW_LEN
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub anchors: Vec<[f64; 3]>,
    /// Index of the differencing reference anchor; defaults to the last.
    #[serde(default)]
    pub reference_anchor: Option<usize>,
    pub scenario: ScenarioConfig,
    /// Range-noise standard deviation in meters.
    pub sigma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Sliding-window length for window-corrected methods.
    #[serde(default = "default_window")]
    pub window: usize,
    pub methods: Vec<MethodEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    RandomPoints {
        count: usize,
        bounds: BoundsConfig,
    },
    Route {
        /// Defaults to the built-in two-part route when omitted.
        #[serde(default)]
        waypoints: Option<Vec<[f64; 3]>>,
        step: f64,
    },
    Stationary {
        point: [f64; 3],
        steps: usize,
    },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub mu2: Option<Mu2Field>,
    #[serde(default)]
    pub omega: Option<OmegaField>,
    #[serde(default)]
    pub truncate: Option<usize>,
    /// Relaxation cut; "auto" selects it from the conditioning target.
    #[serde(default)]
    pub s: Option<CutField>,
    #[serde(default)]
    pub correction: Option<Correction>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Mu2Field {
    Number(f64),
    Keyword(String),
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OmegaField {
    Number(f64),
    Keyword(String),
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CutField {
    Index(usize),
    Keyword(String),
}

pub fn parse_mu2(field: &Mu2Field) -> anyhow::Result<Mu2Setting> {
    Ok(match field {
        Mu2Field::Number(v) => Mu2Setting::Value(*v),
        Mu2Field::Keyword(word) => match word.as_str() {
            "auto" => Mu2Setting::Auto,
            "second_smallest" => Mu2Setting::SecondSmallest,
            other => bail!("unknown mu2 keyword '{other}' (expected auto|second_smallest)"),
        },
    })
}

pub fn parse_omega(field: &OmegaField) -> anyhow::Result<OmegaSetting> {
    Ok(match field {
        OmegaField::Number(v) => OmegaSetting::Value(*v),
        OmegaField::Keyword(word) => match word.as_str() {
            "zero" => OmegaSetting::Zero,
            "lambda_min" => OmegaSetting::LambdaMin,
            other => bail!("unknown omega keyword '{other}' (expected zero|lambda_min)"),
        },
    })
}

fn parse_cut(field: &CutField) -> anyhow::Result<CutSetting> {
    Ok(match field {
        CutField::Index(s) => CutSetting::At(*s),
        CutField::Keyword(word) => match word.as_str() {
            "auto" => CutSetting::Auto {
                kappa_target: hireg::regularization::DEFAULT_CONDITION_TARGET,
            },
            "smallest_only" => CutSetting::SmallestOnly,
            other => bail!("unknown s keyword '{other}' (expected auto|smallest_only)"),
        },
    })
}

/// Build a solver request from a config entry (shared with the locate flags).
pub fn build_request(
    method: MethodTag,
    k: Option<usize>,
    mu2: Option<&Mu2Field>,
    omega: Option<&OmegaField>,
    truncate: Option<usize>,
    cut: Option<&CutField>,
) -> anyhow::Result<PlanRequest> {
    let mut request = match method {
        MethodTag::Ls => PlanRequest::ls(),
        MethodTag::Tsvd => PlanRequest::tsvd(truncate.unwrap_or(1)),
        MethodTag::Tr => {
            let Some(field) = mu2 else {
                bail!("method tr requires mu2")
            };
            match parse_mu2(field)? {
                Mu2Setting::Value(v) => PlanRequest::tikhonov(v),
                _ => bail!("method tr requires a numeric mu2"),
            }
        }
        MethodTag::Ftr => {
            let Some(field) = mu2 else {
                bail!("method ftr requires mu2 (oftr is the auto variant)")
            };
            match parse_mu2(field)? {
                Mu2Setting::Value(v) => PlanRequest::ftr(v),
                Mu2Setting::SecondSmallest => {
                    PlanRequest::ftr(0.0).with_mu2(Mu2Setting::SecondSmallest)
                }
                Mu2Setting::Auto => bail!("method ftr requires an explicit mu2; use oftr"),
            }
        }
        MethodTag::Oftr => PlanRequest::oftr(),
        MethodTag::Hr => {
            let mut request = PlanRequest::hr(k.unwrap_or(1));
            if let Some(field) = mu2 {
                request = request.with_mu2(parse_mu2(field)?);
            }
            request
        }
    };
    if method != MethodTag::Hr {
        if let Some(k) = k {
            request.k = k;
        }
    }
    if let Some(field) = omega {
        request = request.with_omega(parse_omega(field)?);
    }
    if let Some(field) = cut {
        request = request.with_cut(parse_cut(field)?);
    }
    Ok(request)
}

impl MethodEntry {
    pub fn to_method_config(&self) -> anyhow::Result<MethodConfig> {
        let method: MethodTag = self
            .method
            .parse()
            .with_context(|| format!("method entry '{}'", self.method))?;
        let request = build_request(
            method,
            self.k,
            self.mu2.as_ref(),
            self.omega.as_ref(),
            self.truncate,
            self.s.as_ref(),
        )?;
        let mut config = MethodConfig::new(request);
        if let Some(correction) = self.correction {
            config = config.with_correction(correction);
        }
        if let Some(label) = &self.label {
            config = config.with_label(label.clone());
        }
        Ok(config)
    }
}

pub fn build_anchors(
    positions: &[[f64; 3]],
    reference: Option<usize>,
) -> anyhow::Result<AnchorSet> {
    let points: Vec<Vector3<f64>> = positions
        .iter()
        .map(|p| Vector3::new(p[0], p[1], p[2]))
        .collect();
    let anchors = match reference {
        Some(index) => AnchorSet::with_reference(points, index)?,
        None => AnchorSet::new(points)?,
    };
    Ok(anchors)
}

impl SimulateConfig {
    pub fn seeds(&self) -> anyhow::Result<Vec<u64>> {
        match (&self.seeds, self.seed) {
            (Some(list), None) if !list.is_empty() => Ok(list.clone()),
            (None, Some(seed)) => Ok(vec![seed]),
            (None, None) => Ok(vec![0]),
            _ => bail!("specify either 'seed' or a nonempty 'seeds', not both"),
        }
    }

    pub fn scenario_for_seed(&self, seed: u64) -> anyhow::Result<Scenario> {
        let anchors = build_anchors(&self.anchors, self.reference_anchor)?;
        let scenario = match &self.scenario {
            ScenarioConfig::RandomPoints { count, bounds } => {
                let bounds = Box3::new(
                    Vector3::new(bounds.min[0], bounds.min[1], bounds.min[2]),
                    Vector3::new(bounds.max[0], bounds.max[1], bounds.max[2]),
                )?;
                random_points_scenario(&bounds, *count, anchors, self.sigma, seed)?
            }
            ScenarioConfig::Route { waypoints, step } => {
                let waypoints: Vec<Vector3<f64>> = match waypoints {
                    Some(list) => list.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
                    None => default_route_waypoints(),
                };
                route_scenario(anchors, &waypoints, *step, self.sigma, seed)?
            }
            ScenarioConfig::Stationary { point, steps } => stationary_scenario(
                anchors,
                Vector3::new(point[0], point[1], point[2]),
                *steps,
                self.sigma,
                seed,
            )?,
        };
        Ok(scenario)
    }

    pub fn method_configs(&self) -> anyhow::Result<Vec<MethodConfig>> {
        if self.methods.is_empty() {
            bail!("config lists no methods");
        }
        self.methods.iter().map(|m| m.to_method_config()).collect()
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub anchors: Vec<[f64; 3]>,
    #[serde(default)]
    pub reference_anchor: Option<usize>,
    /// Series orders to sweep.
    pub k: Vec<usize>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Optional scenario: when present, each grid point also reports the
    /// RMSE of the corresponding relaxed solver on that scenario.
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub correction: Option<Correction>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Number of uniform grid points over [λ_n, λ_{n-1}].
    #[serde(default)]
    pub count: Option<usize>,
    /// Explicit μ² values (overrides `count`).
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}
