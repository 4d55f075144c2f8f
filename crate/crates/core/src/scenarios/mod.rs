//! Causal scenarios and their true estimands.

mod cde;
mod confounding;
mod hr;
mod rmst;

pub use cde::{CdeScenario, Link};
pub use confounding::ConfoundingScenario;
pub use hr::{HrScenario, TimeGrid};
pub use rmst::{rmst, RmstScenario};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::Decomposition;

/// Treatment level in {0, 1}.
pub type Arm = u8;

pub(crate) fn check_arm(name: &str, a: Arm) -> Result<()> {
    if a <= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be 0 or 1 (got {a})")))
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Method {
    Quadrature { level: usize, decomposition: Decomposition },
    McIntegration { n_samples: usize, n_reps: usize },
    PotentialOutcomeSim { n_samples: usize, n_reps: usize },
    ClosedForm,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Quadrature { .. } => "quadrature",
            Method::McIntegration { .. } => "mc_integration",
            Method::PotentialOutcomeSim { .. } => "potential_outcome_sim",
            Method::ClosedForm => "closed_form",
        }
    }

    /// K for quadrature, N for Monte Carlo, 0 otherwise.
    pub fn size(&self) -> usize {
        match *self {
            Method::Quadrature { level, .. } => level,
            Method::McIntegration { n_samples, .. } | Method::PotentialOutcomeSim { n_samples, .. } => n_samples,
            Method::ClosedForm => 0,
        }
    }
}

/// One named value, optionally indexed by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval: Option<(f64, f64)>,
}

impl Estimate {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Estimate {
            name: name.into(),
            t: None,
            value,
            se: None,
            interval: None,
        }
    }

    pub fn at(name: impl Into<String>, t: f64, value: f64) -> Self {
        Estimate {
            t: Some(t),
            ..Estimate::new(name, value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthResult {
    pub scenario: String,
    pub method: Method,
    pub estimates: Vec<Estimate>,
}

pub const TRUTH_CSV_HEADER: &str = "scenario,estimand,t,method,size,value,se";

impl TruthResult {
    /// Value of the first time-free estimate called `name`.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.estimates
            .iter()
            .find(|e| e.name == name && e.t.is_none())
            .map(|e| e.value)
    }

    pub fn get_at(&self, name: &str, t: f64) -> Option<f64> {
        self.estimates
            .iter()
            .find(|e| e.name == name && e.t == Some(t))
            .map(|e| e.value)
    }

    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        self.estimates
            .iter()
            .filter(|e| e.name == name)
            .filter_map(|e| e.t.map(|t| (t, e.value)))
            .collect()
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.estimates
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.scenario,
                    e.name,
                    e.t.map(fmt_float).unwrap_or_default(),
                    self.method.label(),
                    self.method.size(),
                    fmt_float(e.value),
                    e.se.map(fmt_float).unwrap_or_default()
                )
            })
            .collect()
    }
}

/// Full-precision, locale-free float formatting for CSV output.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Any supported scenario, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Confounding(ConfoundingScenario),
    Cde(CdeScenario),
    Rmst(RmstScenario),
    Hr(HrScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Confounding(_) => "confounding",
            Scenario::Cde(_) => "cde",
            Scenario::Rmst(_) => "rmst",
            Scenario::Hr(_) => "hr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Confounding(s) => s.validate(),
            Scenario::Cde(s) => s.validate(),
            Scenario::Rmst(s) => s.validate(),
            Scenario::Hr(s) => s.validate(),
        }
    }

    /// All quadrature estimands of the scenario. The decomposition only
    /// affects multivariate normal blocks.
    pub fn truth(&self, id: &str, level: usize, decomposition: Decomposition) -> Result<TruthResult> {
        let mut r = match self {
            Scenario::Confounding(s) => s.odds_ratio_truth(level, decomposition)?,
            Scenario::Cde(s) => s.cde_truth_with(level, decomposition)?,
            Scenario::Rmst(s) => s.mediation_truth(level)?,
            Scenario::Hr(s) => s.mediation_truth(level)?,
        };
        r.scenario = id.to_string();
        Ok(r)
    }
}
