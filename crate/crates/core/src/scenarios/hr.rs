use serde::{Deserialize, Serialize};

use super::{check_arm, Arm, Estimate, Method, TruthResult};
use crate::distributions::{Dist, Quadrature};
use crate::error::{Error, Result};
use crate::grids::Decomposition;
use crate::quad_rules::{integrate_1d, Rule1D};

/// Evaluation times: an explicit list or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    Points(Vec<f64>),
    Range { start: f64, end: f64, points: usize },
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::Range {
            start: 0.1,
            end: 5.0,
            points: 50,
        }
    }
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            TimeGrid::Points(ref v) => v.clone(),
            TimeGrid::Range { start, end, points } => match points {
                0 => vec![],
                1 => vec![start],
                n => (0..n)
                    .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            return Err(Error::InvalidParameter("t_grid must not be empty".into()));
        }
        if v.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("t_grid values must be positive and finite".into()));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("t_grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Weibull time to event with shape γ, scale λ and linear predictor
/// `β_a·a + β_m·m`; mediator `M⁽ᵃ⁾ ~ N(α₀ − α_a·a, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrScenario {
    pub alpha0: f64,
    pub alpha_a: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub beta_a: f64,
    pub beta_m: f64,
    #[serde(default)]
    pub t_grid: TimeGrid,
}

impl Default for HrScenario {
    fn default() -> Self {
        HrScenario {
            alpha0: 0.0,
            alpha_a: 1.0,
            gamma: 1.5,
            lambda: 2.0,
            beta_a: -0.3,
            beta_m: 0.5,
            t_grid: TimeGrid::default(),
        }
    }
}

/// The three nested counterfactuals the ratios need, as (a, a′).
pub const HR_ARMS: [(Arm, Arm); 3] = [(1, 1), (1, 0), (0, 0)];

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t must be positive (got {t})")))
    }
}

impl HrScenario {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("alpha0", self.alpha0),
            ("alpha_a", self.alpha_a),
            ("beta_a", self.beta_a),
            ("beta_m", self.beta_m),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{n} must be finite")));
            }
        }
        for (n, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{n} must be positive (got {v})")));
            }
        }
        self.t_grid.validate()
    }

    pub fn mediator(&self, a_prime: Arm) -> Dist {
        Dist::Normal {
            mu: self.alpha0 - self.alpha_a * a_prime as f64,
            sigma2: 1.0,
        }
    }

    #[inline]
    fn risk(&self, a: Arm, m: f64) -> f64 {
        (self.beta_a * a as f64 + self.beta_m * m).exp()
    }

    #[inline]
    pub fn hazard(&self, t: f64, a: Arm, m: f64) -> f64 {
        self.gamma / self.lambda * (t / self.lambda).powf(self.gamma - 1.0) * self.risk(a, m)
    }

    #[inline]
    pub fn survival(&self, t: f64, a: Arm, m: f64) -> f64 {
        (-(t / self.lambda).powf(self.gamma) * self.risk(a, m)).exp()
    }

    /// Conditional Weibull density; `t` must be positive.
    pub fn weibull_f(&self, t: f64, a: Arm, m: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.density_unchecked(t, a, m))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, t: f64, a: Arm, m: f64) -> f64 {
        let r = self.risk(a, m);
        let z = (t / self.lambda).powf(self.gamma - 1.0);
        self.gamma / self.lambda * z * r * (-(t / self.lambda) * z * r).exp()
    }

    pub fn mediator_rule(&self, a_prime: Arm, level: usize) -> Result<Rule1D> {
        check_arm("a_prime", a_prime)?;
        match self.mediator(a_prime).rule_for(level)? {
            Quadrature::Univariate(r) => Ok(r),
            Quadrature::Grid(_) => unreachable!("univariate mediator"),
        }
    }

    /// Density of `T(a, M⁽ᵃ′⁾)` at `t`.
    pub fn counterfactual_density(&self, a: Arm, a_prime: Arm, t: f64, level: usize) -> Result<f64> {
        check_time(t)?;
        check_arm("a", a)?;
        let r = self.mediator_rule(a_prime, level)?;
        integrate_1d(&r, |m| self.density_unchecked(t, a, m))
    }

    /// Survival of `T(a, M⁽ᵃ′⁾)` at `t`.
    pub fn counterfactual_survival(&self, a: Arm, a_prime: Arm, t: f64, level: usize) -> Result<f64> {
        check_time(t)?;
        check_arm("a", a)?;
        let r = self.mediator_rule(a_prime, level)?;
        integrate_1d(&r, |m| self.survival(t, a, m))
    }

    /// Per-time NDE, NIE and TE on the hazard-ratio scale plus their
    /// trapezoid averages over the grid.
    pub fn mediation_truth(&self, level: usize) -> Result<TruthResult> {
        self.validate()?;
        let times = self.t_grid.values();
        let rules = [self.mediator_rule(0, level)?, self.mediator_rule(1, level)?];
        let mut estimates = Vec::with_capacity(times.len() * 9 + 3);
        let mut series = [Vec::new(), Vec::new(), Vec::new()];
        for &t in &times {
            let mut h = [0.0; 3];
            for (k, &(a, ap)) in HR_ARMS.iter().enumerate() {
                let r = &rules[ap as usize];
                let f = integrate_1d(r, |m| self.density_unchecked(t, a, m))?;
                let s = integrate_1d(r, |m| self.survival(t, a, m))?;
                if !(s > f64::MIN_POSITIVE) {
                    return Err(Error::Domain(format!(
                        "counterfactual survival underflows at t = {t}; use a smaller t_grid upper bound"
                    )));
                }
                h[k] = f / s;
                let tag = format!("{a}_{ap}");
                estimates.push(Estimate::at(format!("f_{tag}"), t, f));
                estimates.push(Estimate::at(format!("s_{tag}"), t, s));
                estimates.push(Estimate::at(format!("h_{tag}"), t, h[k]));
            }
            let ratios = ratios_from_hazards(h);
            for (i, (name, v)) in ["nde", "nie", "te"].iter().zip(ratios).enumerate() {
                estimates.push(Estimate::at(*name, t, v));
                series[i].push(v);
            }
        }
        for (name, s) in ["nde_avg", "nie_avg", "te_avg"].iter().zip(&series) {
            estimates.push(Estimate::new(*name, time_average(&times, s)));
        }
        Ok(TruthResult {
            scenario: "hr".into(),
            method: Method::Quadrature {
                level,
                decomposition: Decomposition::NoRotation,
            },
            estimates,
        })
    }
}

/// (NDE, NIE, TE) from hazards ordered as `HR_ARMS`.
pub(crate) fn ratios_from_hazards(h: [f64; 3]) -> [f64; 3] {
    let [h11, h10, h00] = h;
    [h10 / h00, h11 / h10, h11 / h00]
}

/// Trapezoid average of `y` over `t`; a single point is its own average.
pub fn time_average(t: &[f64], y: &[f64]) -> f64 {
    if t.len() == 1 {
        return y[0];
    }
    let area: f64 = t
        .windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum();
    area / (t[t.len() - 1] - t[0])
}
