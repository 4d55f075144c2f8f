use serde::{Deserialize, Serialize};

use super::{check_arm, Arm, Estimate, Method, TruthResult};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::grids::{integrate_nd, rotate_grid, tensor_grid, CovSpec, Decomposition, GridND, DEFAULT_POINT_BUDGET};
use crate::special_fn::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Logit,
}

impl Link {
    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => expit(eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma2: f64,
}

/// `L | U, A=a ~ N(intercept + a_coef·a + u_coef·U, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LGivenU {
    pub intercept: f64,
    pub a_coef: f64,
    pub u_coef: f64,
    pub sigma2: f64,
}

impl Default for LGivenU {
    fn default() -> Self {
        LGivenU {
            intercept: 15.0,
            a_coef: 1.0,
            u_coef: 0.1,
            sigma2: 1.0,
        }
    }
}

fn default_c() -> NormalParams {
    NormalParams { mu: -10.0, sigma2: 1.0 }
}

fn default_u() -> NormalParams {
    NormalParams { mu: 3.0, sigma2: 1.0 }
}

fn default_a() -> Arm {
    1
}

/// Controlled direct effect `E[Y^(a,m)] − E[Y^(a*,m)]` with outcome mean
/// `g⁻¹(β₀ + β₁a + β₂m + β₃C + β₄L + β₅U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdeScenario {
    #[serde(default)]
    pub link: Link,
    pub beta: [f64; 6],
    #[serde(default = "default_a")]
    pub a: Arm,
    #[serde(default)]
    pub a_star: Arm,
    #[serde(default)]
    pub m: f64,
    #[serde(default = "default_c")]
    pub c: NormalParams,
    #[serde(default = "default_u")]
    pub u: NormalParams,
    #[serde(default)]
    pub l_given_u: LGivenU,
}

impl Default for CdeScenario {
    /// Identity link with β₁ + β₄ = 12.
    fn default() -> Self {
        CdeScenario {
            link: Link::Identity,
            beta: [1.0, 8.0, 0.5, 0.2, 4.0, 0.3],
            a: 1,
            a_star: 0,
            m: 0.0,
            c: default_c(),
            u: default_u(),
            l_given_u: LGivenU::default(),
        }
    }
}

impl CdeScenario {
    pub fn logit_example() -> Self {
        CdeScenario {
            link: Link::Logit,
            beta: [-4.0, 1.0, 0.5, 0.1, 0.2, 0.3],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_arm("a", self.a)?;
        check_arm("a_star", self.a_star)?;
        if self.a == self.a_star {
            return Err(Error::InvalidParameter("a and a_star must differ".into()));
        }
        let finite = self.beta.iter().all(|b| b.is_finite())
            && self.m.is_finite()
            && [self.c.mu, self.u.mu, self.l_given_u.intercept, self.l_given_u.a_coef, self.l_given_u.u_coef]
                .iter()
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("CDE parameters must be finite".into()));
        }
        for (name, v) in [
            ("c.sigma2", self.c.sigma2),
            ("u.sigma2", self.u.sigma2),
            ("l_given_u.sigma2", self.l_given_u.sigma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
            }
        }
        Ok(())
    }

    /// Joint law of (U, L) when A is set to `arm`.
    pub fn joint_ul(&self, arm: Arm) -> Result<CovSpec> {
        let l = &self.l_given_u;
        let su = self.u.sigma2;
        CovSpec::new(
            vec![self.u.mu, l.intercept + l.a_coef * arm as f64 + l.u_coef * self.u.mu],
            vec![
                vec![su, l.u_coef * su],
                vec![l.u_coef * su, l.u_coef * l.u_coef * su + l.sigma2],
            ],
        )
    }

    /// Outcome mean given covariates, treatment `arm` and the fixed mediator.
    #[inline]
    pub fn outcome_mean(&self, arm: Arm, c: f64, l: f64, u: f64) -> f64 {
        let b = &self.beta;
        self.link
            .inverse(b[0] + b[1] * arm as f64 + b[2] * self.m + b[3] * c + b[4] * l + b[5] * u)
    }

    /// Grid over (C, U, L) for one arm.
    pub fn grid(&self, arm: Arm, level: usize, decomposition: Decomposition) -> Result<GridND> {
        let c = Dist::Normal {
            mu: self.c.mu,
            sigma2: self.c.sigma2,
        }
        .rule_for(level)?
        .into_grid();
        let ul = rotate_grid(&tensor_grid(level, 2)?, &self.joint_ul(arm)?, decomposition)?;
        GridND::product(&[c, ul], DEFAULT_POINT_BUDGET)
    }

    /// `E[Y^(arm, m)]`.
    pub fn arm_mean(&self, arm: Arm, level: usize, decomposition: Decomposition) -> Result<f64> {
        self.validate()?;
        check_arm("arm", arm)?;
        let g = self.grid(arm, level, decomposition)?;
        integrate_nd(&g, |x| self.outcome_mean(arm, x[0], x[2], x[1]))
    }

    pub fn cde_truth(&self, level: usize) -> Result<TruthResult> {
        self.cde_truth_with(level, Decomposition::Spectral)
    }

    pub fn cde_truth_with(&self, level: usize, decomposition: Decomposition) -> Result<TruthResult> {
        let ya = self.arm_mean(self.a, level, decomposition)?;
        let yb = self.arm_mean(self.a_star, level, decomposition)?;
        Ok(TruthResult {
            scenario: "cde".into(),
            method: Method::Quadrature { level, decomposition },
            estimates: vec![
                Estimate::new("ey_a", ya),
                Estimate::new("ey_a_star", yb),
                Estimate::new("cde", ya - yb),
            ],
        })
    }

    /// Exact CDE under the identity link.
    pub fn identity_closed_form(&self) -> Option<f64> {
        (self.link == Link::Identity).then(|| {
            let d = self.a as f64 - self.a_star as f64;
            (self.beta[1] + self.beta[4] * self.l_given_u.a_coef) * d
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_recovers_twelve() {
        let r = CdeScenario::default().cde_truth(5).unwrap();
        assert!((r.get("cde").unwrap() - 12.0).abs() < 1e-10);
    }

    #[test]
    fn identity_link_matches_linearity() {
        let s = CdeScenario {
            beta: [0.3, -2.0, 1.5, 0.7, -1.1, 2.2],
            a: 0,
            a_star: 1,
            m: 2.0,
            ..Default::default()
        };
        let r = s.cde_truth(5).unwrap();
        assert!((r.get("cde").unwrap() - s.identity_closed_form().unwrap()).abs() < 1e-10);
        // arm mean itself is linear in the means
        let ey0 = 0.3 + 1.5 * 2.0 + 0.7 * -10.0 - 1.1 * (15.0 + 0.3) + 2.2 * 3.0;
        assert!((r.get("ey_a").unwrap() - ey0).abs() < 1e-10);
    }

    #[test]
    fn no_treatment_pathway_is_null() {
        let s = CdeScenario {
            link: Link::Logit,
            beta: [0.2, 0.0, 0.8, 0.0, 0.0, 0.0],
            ..Default::default()
        };
        assert_eq!(s.cde_truth(5).unwrap().get("cde").unwrap(), 0.0);
    }

    #[test]
    fn joint_covariance() {
        let c = CdeScenario::default().joint_ul(1).unwrap();
        assert_eq!(c.mean(), &[3.0, 16.3]);
        assert!((c.cov(1, 1) - 1.01).abs() < 1e-15);
        assert!((c.cov(0, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_equal_arms() {
        let s = CdeScenario {
            a_star: 1,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_defaults_fill_in() {
        let s: CdeScenario = serde_json::from_str(r#"{"beta":[1,8,0.5,0.2,4,0.3]}"#).unwrap();
        assert_eq!(s, CdeScenario::default());
        assert!(serde_json::from_str::<CdeScenario>(r#"{"beta":[1,8,0.5,0.2,4,0.3],"mu":1}"#).is_err());
    }
}
