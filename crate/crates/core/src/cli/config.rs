//! JSON scenario configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grids::Decomposition;
use crate::mc_engine::IntervalKind;
use crate::scenarios::{CdeScenario, ConfoundingScenario, HrScenario, RmstScenario, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub id: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub method: MethodBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodBlock {
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub mc: McBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    #[serde(default = "default_level")]
    pub level: usize,
    #[serde(default)]
    pub decomposition: Decomposition,
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        QuadratureBlock {
            level: default_level(),
            decomposition: Decomposition::Spectral,
        }
    }
}

fn default_level() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    /// Used when `--seed` is not given.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub interval: IntervalKind,
    /// Also run potential-outcome simulation (confounding scenarios only).
    #[serde(default)]
    pub potential_outcomes: bool,
    /// Evaluation times for hazard-ratio scenarios; defaults to the t grid.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock {
            n_samples: default_n(),
            n_reps: default_reps(),
            seed: None,
            interval: IntervalKind::Empirical,
            potential_outcomes: false,
            times: None,
        }
    }
}

fn default_n() -> usize {
    1_000_000
}

fn default_reps() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Directory for result files; `--out` overrides it.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Parses and validates a config, reporting the JSON path of any bad field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "scenario" {
            if let Some(detail) = scenario_detail(text) {
                return detail;
            }
        }
        format!("at `{path}`: {}", e.into_inner())
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        ));
    }
    if cfg.id.is_empty() || cfg.id.contains(',') {
        return Err("id must be non-empty and contain no commas".into());
    }
    cfg.scenario.validate().map_err(|e| format!("scenario: {e}"))?;
    if cfg.method.quadrature.level == 0 {
        return Err("method.quadrature.level must be at least 1".into());
    }
    Ok(cfg)
}

// The tagged scenario enum is buffered before dispatch, which hides the path
// below `scenario`. Deserializing the variant on its own recovers it.
fn scenario_detail(text: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut body = v.get("scenario")?.as_object()?.clone();
    let kind = body.remove("kind")?;
    let body = serde_json::Value::Object(body);
    let res = match kind.as_str()? {
        "confounding" => variant::<ConfoundingScenario>(body),
        "cde" => variant::<CdeScenario>(body),
        "rmst" => variant::<RmstScenario>(body),
        "hr" => variant::<HrScenario>(body),
        _ => return None,
    };
    res.err()
}

fn variant<T: serde::de::DeserializeOwned>(body: serde_json::Value) -> Result<(), String> {
    serde_path_to_error::deserialize::<_, T>(body).map(drop).map_err(|e| {
        let path = match e.path().to_string() {
            p if p == "." => "scenario".to_string(),
            p => format!("scenario.{p}"),
        };
        format!("at `{path}`: {}", e.into_inner())
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}
