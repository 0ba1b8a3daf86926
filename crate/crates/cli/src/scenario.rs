//! Scenario files: a TOML document describing a space, a conditioning
//! partition, a map, the input vector, and optional density / coarsening /
//! solver sections. Points are referred to by label, never by index.

use std::collections::BTreeMap;
use std::path::Path;

use quasidual::{Density, FiniteSpace, MapSpec, Partition, Rv, SolverCfg, Transform, Utility};
use serde::Deserialize;

#[derive(Debug)]
pub enum ScenarioError {
    Io(std::io::Error),
    Parse(String),
    Validation(String),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioError::Io(e) => write!(f, "cannot read scenario: {e}"),
            ScenarioError::Parse(e) => write!(f, "cannot parse scenario: {e}"),
            ScenarioError::Validation(msg) => write!(f, "invalid scenario: {msg}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    space: RawSpace,
    g: RawPartition,
    map: RawMap,
    x: RawVector,
    q: Option<RawVector>,
    gamma: Option<RawPartition>,
    solver: Option<RawSolver>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    atoms: Vec<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    family: String,
    gamma: Option<f64>,
    transform: Option<String>,
    inner_family: Option<String>,
    inner_gamma: Option<f64>,
    utility: Option<String>,
    alpha: Option<f64>,
    eta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVector {
    values: BTreeMap<String, f64>,
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    bisect_tol: Option<f64>,
    bracket_pad: Option<f64>,
    restarts: Option<usize>,
    grid_fallback_resolution: Option<usize>,
    seed: Option<u64>,
}

/// A fully validated scenario.
pub struct Scenario {
    pub space: FiniteSpace,
    pub g: Partition,
    pub map: MapKind,
    pub x: Rv,
    pub q: Option<Density>,
    /// Explicit coarsening partition, when given.
    pub gamma: Option<Partition>,
    pub solver: SolverCfg,
}

/// Either a dual-engine map or the certainty-equivalent evaluation, which is
/// defined by a utility function and only supports primal evaluation.
pub enum MapKind {
    Spec(MapSpec),
    Cce(Utility),
}

fn validation<E: std::fmt::Display>(e: E) -> ScenarioError {
    ScenarioError::Validation(e.to_string())
}

fn resolve_labels(
    space: &FiniteSpace,
    blocks: &[Vec<String>],
) -> Result<Vec<Vec<usize>>, ScenarioError> {
    blocks
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|label| {
                    space
                        .index_of(label)
                        .ok_or_else(|| ScenarioError::Validation(format!("unknown label {label:?}")))
                })
                .collect()
        })
        .collect()
}

fn resolve_vector(space: &FiniteSpace, raw: &RawVector) -> Result<Vec<f64>, ScenarioError> {
    let mut out = vec![f64::NAN; space.len()];
    for (label, &v) in &raw.values {
        let idx = space
            .index_of(label)
            .ok_or_else(|| ScenarioError::Validation(format!("unknown label {label:?}")))?;
        out[idx] = v;
    }
    for (i, v) in out.iter().enumerate() {
        if v.is_nan() {
            return Err(ScenarioError::Validation(format!(
                "no value given for label {:?}",
                space.labels()[i]
            )));
        }
    }
    Ok(out)
}

const FAMILIES: &str =
    "entropic, worst_case, composite, transformed, mirrored_entropic, cce";

fn build_map(raw: &RawMap, g: Partition) -> Result<MapKind, ScenarioError> {
    let inner = |family: &str, gamma: Option<f64>, g: Partition| -> Result<MapSpec, ScenarioError> {
        match family {
            "entropic" => MapSpec::entropic(gamma.unwrap_or(1.0), g).map_err(validation),
            "worst_case" => Ok(MapSpec::WorstCase { g }),
            "composite" => Ok(MapSpec::Composite { g }),
            other => Err(ScenarioError::Parse(format!(
                "unknown inner family {other:?}; supported: entropic, worst_case, composite"
            ))),
        }
    };
    match raw.family.as_str() {
        "entropic" | "worst_case" | "composite" => {
            inner(&raw.family, raw.gamma, g).map(MapKind::Spec)
        }
        "transformed" => {
            let transform = match raw.transform.as_deref() {
                Some("arctan") => Transform::Arctan,
                Some("shifted_cubic") => Transform::ShiftedCubic,
                other => {
                    return Err(ScenarioError::Validation(format!(
                        "transform must be \"arctan\" or \"shifted_cubic\", got {other:?}"
                    )))
                }
            };
            let base = inner(
                raw.inner_family.as_deref().unwrap_or("entropic"),
                raw.inner_gamma,
                g,
            )?;
            Ok(MapKind::Spec(MapSpec::Transformed {
                inner: Box::new(base),
                transform,
            }))
        }
        "mirrored_entropic" => {
            let base = MapSpec::entropic(raw.gamma.unwrap_or(1.0), g).map_err(validation)?;
            Ok(MapKind::Spec(base.mirror()))
        }
        "cce" => {
            let utility = match raw.utility.as_deref() {
                Some("exponential") => Utility::Exponential {
                    alpha: raw.alpha.unwrap_or(1.0),
                },
                Some("power") => Utility::Power {
                    eta: raw.eta.unwrap_or(0.5),
                },
                Some("log") => Utility::Log,
                other => {
                    return Err(ScenarioError::Validation(format!(
                        "utility must be \"exponential\", \"power\" or \"log\", got {other:?}"
                    )))
                }
            };
            Ok(MapKind::Cce(utility))
        }
        other => Err(ScenarioError::Parse(format!(
            "unknown map family {other:?}; supported families: {FAMILIES}"
        ))),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(ScenarioError::Io)?;
    let raw: RawScenario =
        toml::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;

    let space = FiniteSpace::new(raw.space.labels.clone(), raw.space.probs.clone())
        .map_err(validation)?;
    let g = Partition::new(&space, resolve_labels(&space, &raw.g.atoms)?).map_err(validation)?;
    let x = Rv::new(&space, resolve_vector(&space, &raw.x)?).map_err(validation)?;
    let q = raw
        .q
        .as_ref()
        .map(|rq| {
            Density::new(&space, resolve_vector(&space, rq)?, false).map_err(validation)
        })
        .transpose()?;
    let gamma = raw
        .gamma
        .as_ref()
        .map(|rp| {
            let p = Partition::new(&space, resolve_labels(&space, &rp.atoms)?)
                .map_err(validation)?;
            if !g.refines(&p) {
                return Err(ScenarioError::Validation(
                    "gamma blocks must be unions of g atoms".into(),
                ));
            }
            Ok(p)
        })
        .transpose()?;

    let map = build_map(&raw.map, g.clone())?;

    let rs = raw.solver.unwrap_or_default();
    let mut solver = SolverCfg::default();
    if let Some(v) = rs.bisect_tol {
        if !(v > 0.0) {
            return Err(ScenarioError::Validation("bisect_tol must be positive".into()));
        }
        solver.bisect_tol = v;
    }
    if let Some(v) = rs.bracket_pad {
        solver.bracket_pad = v;
    }
    if let Some(v) = rs.restarts {
        if v == 0 {
            return Err(ScenarioError::Validation("restarts must be at least 1".into()));
        }
        solver.restarts = v;
    }
    if let Some(v) = rs.grid_fallback_resolution {
        solver.grid_fallback_resolution = v;
    }
    if let Some(v) = rs.seed {
        solver.seed = v;
    }

    Ok(Scenario {
        space,
        g,
        map,
        x,
        q,
        gamma,
        solver,
    })
}
