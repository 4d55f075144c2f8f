use serde::{Deserialize, Serialize};

use super::{check_arm, Arm, Estimate, Method, TruthResult};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::grids::Decomposition;
use crate::quad_rules::{integrate_1d, Rule1D};

/// Restricted mean survival time `∫₀^τ e^{−λt} dt` of an exponential law.
pub fn rmst(tau: f64, lam: f64) -> f64 {
    -(-lam * tau).exp_m1() / lam
}

/// Exponential survival with rate `exp(β₀ + Aβ_A + Mβ_M)` and mediator
/// `M⁽ᵃ⁾ ~ N(μ_a, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmstScenario {
    pub mu0: f64,
    pub mu1: f64,
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_m: f64,
    pub tau: f64,
}

impl Default for RmstScenario {
    fn default() -> Self {
        RmstScenario {
            mu0: 0.0,
            mu1: -1.0,
            beta0: -1.0,
            beta_a: -0.5,
            beta_m: 0.4,
            tau: 3.0,
        }
    }
}

impl RmstScenario {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu0, self.mu1, self.beta0, self.beta_a, self.beta_m, self.tau];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("RMST parameters must be finite".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!("tau must be positive (got {})", self.tau)));
        }
        Ok(())
    }

    pub fn mediator(&self, a_star: Arm) -> Dist {
        Dist::Normal {
            mu: if a_star == 1 { self.mu1 } else { self.mu0 },
            sigma2: 1.0,
        }
    }

    #[inline]
    pub fn rate(&self, a: Arm, m: f64) -> f64 {
        (self.beta0 + a as f64 * self.beta_a + m * self.beta_m).exp()
    }

    /// `μ(τ; a, m)`.
    #[inline]
    pub fn conditional_rmst(&self, a: Arm, m: f64) -> f64 {
        rmst(self.tau, self.rate(a, m))
    }

    fn rule(&self, a_star: Arm, level: usize) -> Result<Rule1D> {
        match self.mediator(a_star).rule_for(level)? {
            crate::distributions::Quadrature::Univariate(r) => Ok(r),
            crate::distributions::Quadrature::Grid(_) => unreachable!("univariate mediator"),
        }
    }

    /// `E_{M⁽ᵃ*⁾} μ(τ; a, M⁽ᵃ*⁾)`.
    pub fn arm_mean(&self, a: Arm, a_star: Arm, level: usize) -> Result<f64> {
        self.validate()?;
        check_arm("a", a)?;
        check_arm("a_star", a_star)?;
        let r = self.rule(a_star, level)?;
        integrate_1d(&r, |m| self.conditional_rmst(a, m))
    }

    pub fn mediation_truth(&self, level: usize) -> Result<TruthResult> {
        let m11 = self.arm_mean(1, 1, level)?;
        let m00 = self.arm_mean(0, 0, level)?;
        let m10 = self.arm_mean(1, 0, level)?;
        Ok(TruthResult {
            scenario: "rmst".into(),
            method: Method::Quadrature {
                level,
                decomposition: Decomposition::NoRotation,
            },
            estimates: effects(m11, m00, m10),
        })
    }
}

/// Arm means and the three contrasts built from them.
pub(crate) fn effects(m11: f64, m00: f64, m10: f64) -> Vec<Estimate> {
    vec![
        Estimate::new("mu_1_1", m11),
        Estimate::new("mu_0_0", m00),
        Estimate::new("mu_1_0", m10),
        Estimate::new("te", m11 - m00),
        Estimate::new("nde", m10 - m00),
        Estimate::new("nie", m11 - m10),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmst_formula() {
        assert!((rmst(3.0, 1.0) - (1.0 - (-3.0f64).exp())).abs() < 1e-15);
        assert!((rmst(1e-6, 2.0) - 1e-6).abs() < 1e-12);
        let s = RmstScenario::default();
        let lam = (s.beta0 + s.beta_a + s.mu1 * s.beta_m).exp();
        assert_eq!(s.conditional_rmst(1, s.mu1), rmst(3.0, lam));
    }

    #[test]
    fn decomposition_holds() {
        let r = RmstScenario::default().mediation_truth(20).unwrap();
        let (te, nde, nie) = (r.get("te").unwrap(), r.get("nde").unwrap(), r.get("nie").unwrap());
        assert!((te - nde - nie).abs() < 1e-14);
    }

    #[test]
    fn null_mediator_effect() {
        let s = RmstScenario {
            beta_m: 0.0,
            ..Default::default()
        };
        let r = s.mediation_truth(20).unwrap();
        assert_eq!(r.get("nie").unwrap(), 0.0);
        assert_eq!(r.get("te").unwrap(), r.get("nde").unwrap());
    }

    #[test]
    fn no_effect_at_all() {
        let s = RmstScenario {
            beta_a: 0.0,
            mu1: 0.0,
            ..Default::default()
        };
        let r = s.mediation_truth(20).unwrap();
        for k in ["te", "nde", "nie"] {
            assert_eq!(r.get(k).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let s = RmstScenario {
            tau: 0.0,
            ..Default::default()
        };
        assert!(s.mediation_truth(5).is_err());
    }
}
