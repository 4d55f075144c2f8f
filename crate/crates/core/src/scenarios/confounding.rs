use serde::{Deserialize, Serialize};

use super::{check_arm, Arm, Estimate, Method, TruthResult};
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::grids::{integrate_nd, CovSpec, Decomposition, GridND, DEFAULT_POINT_BUDGET};
use crate::special_fn::{closed_form_probs, expit, odds_ratio, ClosedFormCase};

/// Binary outcome with `P(Y=1|A,C) = expit(β₀ + β₁A + β₂ᵀC)`.
///
/// `confounders` are independent blocks; a multivariate normal block
/// contributes several coordinates, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct ConfoundingScenario {
    beta0: f64,
    beta1: f64,
    beta2: Vec<f64>,
    confounders: Vec<Dist>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Repr {
    beta0: f64,
    beta1: f64,
    beta2: Vec<f64>,
    confounders: Vec<Dist>,
}

impl TryFrom<Repr> for ConfoundingScenario {
    type Error = Error;
    fn try_from(r: Repr) -> Result<Self> {
        ConfoundingScenario::new(r.beta0, r.beta1, r.beta2, r.confounders)
    }
}

impl From<ConfoundingScenario> for Repr {
    fn from(s: ConfoundingScenario) -> Self {
        Repr {
            beta0: s.beta0,
            beta1: s.beta1,
            beta2: s.beta2,
            confounders: s.confounders,
        }
    }
}

impl ConfoundingScenario {
    pub fn new(beta0: f64, beta1: f64, beta2: Vec<f64>, confounders: Vec<Dist>) -> Result<Self> {
        let s = ConfoundingScenario {
            beta0,
            beta1,
            beta2,
            confounders,
        };
        s.validate()?;
        Ok(s)
    }

    /// β₀ = β₁ = 1, β₂ = −1, C ~ N(0, 1).
    pub fn normal_example() -> Self {
        Self::new(1.0, 1.0, vec![-1.0], vec![Dist::Normal { mu: 0.0, sigma2: 1.0 }]).unwrap()
    }

    /// β₀ = β₁ = 1, β₂ = (0.1, 0.1), C ~ N((−5, −10), [[1, 1], [1, 2]]).
    pub fn bivariate_example() -> Self {
        let cov = CovSpec::new(vec![-5.0, -10.0], vec![vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        Self::new(1.0, 1.0, vec![0.1, 0.1], vec![Dist::MvNormal(cov)]).unwrap()
    }

    pub fn closed_form_example(case: ClosedFormCase) -> Self {
        let confounders = match case {
            ClosedFormCase::UniformCase => vec![
                Dist::Uniform { a: -2.0, b: 2.0 },
                Dist::Uniform { a: -4.0, b: 0.0 },
            ],
            ClosedFormCase::ExponentialCase => vec![
                Dist::Exponential { rate: 1.0 },
                Dist::Exponential { rate: 2.0 },
            ],
            ClosedFormCase::GammaCase => vec![
                Dist::Gamma { shape: 1.0, rate: 0.5 },
                Dist::Gamma { shape: 4.0, rate: 0.5 },
            ],
        };
        Self::new(0.0, -1.0, vec![0.5, 0.5], confounders).unwrap()
    }

    /// `C ~ N(−5·i, min(i, j))` in `dim` dimensions, every β₂ entry 0.1.
    pub fn dimension_example(dim: usize) -> Result<Self> {
        let mean = (1..=dim).map(|i| -5.0 * i as f64).collect();
        let cov = (1..=dim)
            .map(|i| (1..=dim).map(|j| i.min(j) as f64).collect())
            .collect();
        Self::new(1.0, 1.0, vec![0.1; dim], vec![Dist::MvNormal(CovSpec::new(mean, cov)?)])
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("beta0", self.beta0), ("beta1", self.beta1)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{n} must be finite")));
            }
        }
        if self.beta2.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("beta2 entries must be finite".into()));
        }
        if self.confounders.is_empty() {
            return Err(Error::InvalidParameter("at least one confounder is required".into()));
        }
        for d in &self.confounders {
            d.validate()?;
        }
        if self.beta2.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: self.beta2.len(),
            });
        }
        Ok(())
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> &[f64] {
        &self.beta2
    }

    pub fn confounders(&self) -> &[Dist] {
        &self.confounders
    }

    /// Total confounder dimension.
    pub fn dim(&self) -> usize {
        self.confounders.iter().map(Dist::dim).sum()
    }

    /// The closed-form case this scenario coincides with, if any.
    pub fn closed_form_case(&self) -> Option<ClosedFormCase> {
        [
            ClosedFormCase::UniformCase,
            ClosedFormCase::ExponentialCase,
            ClosedFormCase::GammaCase,
        ]
        .into_iter()
        .find(|&c| *self == Self::closed_form_example(c))
    }

    #[inline]
    pub fn linear_predictor(&self, a: Arm, c: &[f64]) -> f64 {
        let mut eta = self.beta0 + self.beta1 * a as f64;
        for (b, x) in self.beta2.iter().zip(c) {
            eta += b * x;
        }
        eta
    }

    #[inline]
    pub fn outcome_prob(&self, a: Arm, c: &[f64]) -> f64 {
        expit(self.linear_predictor(a, c))
    }

    /// Product grid over the confounder blocks.
    pub fn grid(&self, level: usize, decomposition: Decomposition, budget: u64) -> Result<GridND> {
        let total = (level as u128).checked_pow(self.dim() as u32).unwrap_or(u128::MAX);
        if total > budget as u128 {
            return Err(Error::PointBudgetExceeded {
                level,
                dim: self.dim(),
                points: total,
                budget,
            });
        }
        let parts = self
            .confounders
            .iter()
            .map(|d| Ok(d.rule_for_with(level, decomposition, budget)?.into_grid()))
            .collect::<Result<Vec<_>>>()?;
        GridND::product(&parts, budget)
    }

    pub fn marginal_prob_on(&self, grid: &GridND, a: Arm) -> Result<f64> {
        check_arm("a", a)?;
        if grid.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: grid.dim,
            });
        }
        integrate_nd(grid, |c| self.outcome_prob(a, c))
    }

    /// `P(Y⁽ᵃ⁾ = 1)` by quadrature with `level` nodes per dimension.
    pub fn marginal_prob(&self, a: Arm, level: usize) -> Result<f64> {
        let grid = self.grid(level, Decomposition::Spectral, DEFAULT_POINT_BUDGET)?;
        self.marginal_prob_on(&grid, a)
    }

    pub fn odds_ratio_truth(&self, level: usize, decomposition: Decomposition) -> Result<TruthResult> {
        let grid = self.grid(level, decomposition, DEFAULT_POINT_BUDGET)?;
        let p1 = self.marginal_prob_on(&grid, 1)?;
        let p0 = self.marginal_prob_on(&grid, 0)?;
        probs_result(p1, p0, Method::Quadrature { level, decomposition })
    }

    pub fn closed_form_truth(&self) -> Result<TruthResult> {
        let case = self
            .closed_form_case()
            .ok_or_else(|| Error::MissingReference("confounding".into()))?;
        let (p0, p1) = closed_form_probs(case);
        probs_result(p1, p0, Method::ClosedForm)
    }
}

fn probs_result(p1: f64, p0: f64, method: Method) -> Result<TruthResult> {
    let or = odds_ratio(p1, p0)?;
    Ok(TruthResult {
        scenario: "confounding".into(),
        method,
        estimates: vec![
            Estimate::new("p1", p1),
            Estimate::new("p0", p0),
            Estimate::new("odds_ratio", or),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand() {
        let s = ConfoundingScenario::new(
            0.3,
            -0.7,
            vec![0.0, 0.0],
            vec![Dist::Exponential { rate: 1.0 }, Dist::Uniform { a: 0.0, b: 1.0 }],
        )
        .unwrap();
        for a in [0, 1] {
            let p = s.marginal_prob(a, 1).unwrap();
            assert!((p - expit(0.3 - 0.7 * a as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn no_treatment_effect() {
        let s = ConfoundingScenario::new(0.5, 0.0, vec![-1.0], vec![Dist::Normal { mu: 0.0, sigma2: 1.0 }]).unwrap();
        let r = s.odds_ratio_truth(20, Decomposition::Spectral).unwrap();
        assert!((r.get("odds_ratio").unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn presets_map_to_cases() {
        for c in [
            ClosedFormCase::UniformCase,
            ClosedFormCase::ExponentialCase,
            ClosedFormCase::GammaCase,
        ] {
            assert_eq!(ConfoundingScenario::closed_form_example(c).closed_form_case(), Some(c));
        }
        assert!(ConfoundingScenario::normal_example().closed_form_case().is_none());
        assert!(matches!(
            ConfoundingScenario::normal_example().closed_form_truth(),
            Err(Error::MissingReference(_))
        ));
    }

    #[test]
    fn beta_length_checked() {
        assert!(ConfoundingScenario::new(0.0, 0.0, vec![1.0], vec![]).is_err());
        let r = ConfoundingScenario::new(0.0, 0.0, vec![1.0], vec![Dist::MvNormal(CovSpec::standard(2).unwrap())]);
        assert!(matches!(r, Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn degenerate_probability_is_domain_error() {
        let s = ConfoundingScenario::new(60.0, 1.0, vec![0.0], vec![Dist::Normal { mu: 0.0, sigma2: 1.0 }]).unwrap();
        let e = s.odds_ratio_truth(3, Decomposition::Spectral).unwrap_err();
        assert!(e.is_domain());
    }

    #[test]
    fn budget_checked_before_building() {
        let s = ConfoundingScenario::dimension_example(10).unwrap();
        assert!(matches!(
            s.grid(20, Decomposition::Spectral, DEFAULT_POINT_BUDGET),
            Err(Error::PointBudgetExceeded { .. })
        ));
    }
}
