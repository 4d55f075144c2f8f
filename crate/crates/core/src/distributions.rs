//! Distribution specifications shared by the quadrature and Monte Carlo paths.
//!
//! Sampling uses `ChaCha8Rng` seeded through `SeedableRng::seed_from_u64`,
//! which is portable across platforms; normal variates come from the
//! `rand_distr` ziggurat sampler.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{rotate_grid, tensor_grid_with_budget, CovSpec, Decomposition, GridND, DEFAULT_POINT_BUDGET};
use crate::quad_rules::{compute_normalized_rule, rescale_rule, Rule1D, RuleKind};

/// Seeded generator used for every Monte Carlo draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub enum Dist {
    Normal { mu: f64, sigma2: f64 },
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    /// Shape–rate parameterization: density ∝ x^(shape−1) e^(−rate·x).
    Gamma { shape: f64, rate: f64 },
    MvNormal(CovSpec),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum DistRepr {
    Normal { mu: f64, sigma2: f64 },
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    MvNormal(CovSpec),
}

impl TryFrom<DistRepr> for Dist {
    type Error = Error;
    fn try_from(r: DistRepr) -> Result<Self> {
        let d = match r {
            DistRepr::Normal { mu, sigma2 } => Dist::Normal { mu, sigma2 },
            DistRepr::Uniform { a, b } => Dist::Uniform { a, b },
            DistRepr::Exponential { rate } => Dist::Exponential { rate },
            DistRepr::Gamma { shape, rate } => Dist::Gamma { shape, rate },
            DistRepr::MvNormal(c) => Dist::MvNormal(c),
        };
        d.validate()?;
        Ok(d)
    }
}

impl From<Dist> for DistRepr {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Normal { mu, sigma2 } => DistRepr::Normal { mu, sigma2 },
            Dist::Uniform { a, b } => DistRepr::Uniform { a, b },
            Dist::Exponential { rate } => DistRepr::Exponential { rate },
            Dist::Gamma { shape, rate } => DistRepr::Gamma { shape, rate },
            Dist::MvNormal(c) => DistRepr::MvNormal(c),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite (got {v})")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite (got {v})")))
    }
}

/// Quadrature matched to a distribution: a rule for univariate families, a
/// rotated grid for the multivariate normal.
#[derive(Debug, Clone)]
pub enum Quadrature {
    Univariate(Rule1D),
    Grid(GridND),
}

impl Quadrature {
    pub fn into_grid(self) -> GridND {
        match self {
            Quadrature::Univariate(r) => GridND::from_rule(&r),
            Quadrature::Grid(g) => g,
        }
    }
}

impl Dist {
    pub fn normal(mu: f64, sigma2: f64) -> Result<Self> {
        let d = Dist::Normal { mu, sigma2 };
        d.validate().map(|_| d)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = Dist::Uniform { a, b };
        d.validate().map(|_| d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Dist::Exponential { rate };
        d.validate().map(|_| d)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let d = Dist::Gamma { shape, rate };
        d.validate().map(|_| d)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dist::Normal { .. } => "normal",
            Dist::Uniform { .. } => "uniform",
            Dist::Exponential { .. } => "exponential",
            Dist::Gamma { .. } => "gamma",
            Dist::MvNormal(_) => "mvnormal",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Dist::Normal { mu, sigma2 } => {
                finite("mu", mu)?;
                positive("sigma2", sigma2)
            }
            Dist::Uniform { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("uniform bounds need a < b (got {a}, {b})")))
                }
            }
            Dist::Exponential { rate } => positive("rate", rate),
            Dist::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            // CovSpec is validated on construction
            Dist::MvNormal(_) => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Dist::MvNormal(c) => c.dim(),
            _ => 1,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Dist::Normal { mu, .. } => vec![*mu],
            Dist::Uniform { a, b } => vec![0.5 * (a + b)],
            Dist::Exponential { rate } => vec![1.0 / rate],
            Dist::Gamma { shape, rate } => vec![shape / rate],
            Dist::MvNormal(c) => c.mean().to_vec(),
        }
    }

    /// Marginal variances.
    pub fn variance(&self) -> Vec<f64> {
        match self {
            Dist::Normal { sigma2, .. } => vec![*sigma2],
            Dist::Uniform { a, b } => vec![(b - a) * (b - a) / 12.0],
            Dist::Exponential { rate } => vec![1.0 / (rate * rate)],
            Dist::Gamma { shape, rate } => vec![shape / (rate * rate)],
            Dist::MvNormal(c) => (0..c.dim()).map(|i| c.cov(i, i)).collect(),
        }
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(match *self {
            Dist::Normal { mu, sigma2 } => {
                let z = x[0] - mu;
                (-0.5 * z * z / sigma2).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            }
            Dist::Uniform { a, b } => {
                if x[0] >= a && x[0] <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Dist::Exponential { rate } => {
                if x[0] < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x[0]).exp()
                }
            }
            Dist::Gamma { shape, rate } => {
                if x[0] < 0.0 {
                    0.0
                } else if x[0] == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => rate,
                        _ => 0.0,
                    }
                } else {
                    let ln = shape * rate.ln() + (shape - 1.0) * x[0].ln()
                        - rate * x[0]
                        - statrs::function::gamma::ln_gamma(shape);
                    ln.exp()
                }
            }
            Dist::MvNormal(ref c) => {
                let d = c.dim();
                let l = c.cholesky_factor();
                let diff = DVector::from_iterator(d, x.iter().zip(c.mean()).map(|(a, m)| a - m));
                let z = l
                    .solve_lower_triangular(&diff)
                    .expect("Cholesky factor is nonsingular");
                let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
                let quad = z.dot(&z);
                (-0.5 * (quad + log_det + d as f64 * (2.0 * std::f64::consts::PI).ln())).exp()
            }
        })
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let bad = |e: String| Error::InvalidParameter(e);
        Ok(match *self {
            Dist::Normal { mu, sigma2 } => {
                Sampler::Normal(Normal::new(mu, sigma2.sqrt()).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Uniform { a, b } => {
                Sampler::Uniform(Uniform::new(a, b).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Exponential { rate } => {
                Sampler::Exponential(Exp::new(rate).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| bad(e.to_string()))?)
            }
            Dist::MvNormal(ref c) => {
                let d = c.dim();
                let l = c.cholesky_factor();
                let mut lower = Vec::with_capacity(d * (d + 1) / 2);
                for i in 0..d {
                    for j in 0..=i {
                        lower.push(l[(i, j)]);
                    }
                }
                Sampler::MvNormal {
                    mean: c.mean().to_vec(),
                    lower,
                }
            }
        })
    }

    /// `n` draws, flattened row-major as n × dim.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let sampler = self.sampler()?;
        let d = self.dim();
        let mut rng = seeded_rng(seed);
        let mut out = vec![0.0; n * d];
        let mut scratch = vec![0.0; d];
        for row in out.chunks_exact_mut(d) {
            sampler.fill(&mut rng, row, &mut scratch);
        }
        Ok(out)
    }

    /// Normalized quadrature matched to the distribution family; the
    /// multivariate normal uses the spectral rotation.
    pub fn rule_for(&self, level: usize) -> Result<Quadrature> {
        self.rule_for_with(level, Decomposition::Spectral, DEFAULT_POINT_BUDGET)
    }

    pub fn rule_for_with(&self, level: usize, decomposition: Decomposition, budget: u64) -> Result<Quadrature> {
        self.validate()?;
        let kind = match *self {
            Dist::Normal { .. } => RuleKind::Hermite,
            Dist::Uniform { .. } => RuleKind::Legendre,
            Dist::Exponential { .. } => RuleKind::Laguerre,
            Dist::Gamma { shape, .. } => RuleKind::GenLaguerre { alpha: shape - 1.0 },
            Dist::MvNormal(ref c) => {
                let grid = tensor_grid_with_budget(level, c.dim(), budget)?;
                return Ok(Quadrature::Grid(rotate_grid(&grid, c, decomposition)?));
            }
        };
        let rule = compute_normalized_rule(kind, level)?;
        Ok(Quadrature::Univariate(rescale_rule(&rule, self)?))
    }
}

/// Prepared sampler for one distribution.
#[derive(Debug, Clone)]
pub enum Sampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    MvNormal { mean: Vec<f64>, lower: Vec<f64> },
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::MvNormal { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    /// Writes one draw into `out` (length `dim`); `scratch` must be at least
    /// that long as well.
    #[inline]
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut [f64]) {
        match self {
            Sampler::Normal(d) => out[0] = d.sample(rng),
            Sampler::Uniform(d) => out[0] = d.sample(rng),
            Sampler::Exponential(d) => out[0] = d.sample(rng),
            Sampler::Gamma(d) => out[0] = d.sample(rng),
            Sampler::MvNormal { mean, lower } => {
                let d = mean.len();
                for z in scratch[..d].iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                let mut k = 0;
                for i in 0..d {
                    let mut v = mean[i];
                    for zj in &scratch[..=i] {
                        v += lower[k] * zj;
                        k += 1;
                    }
                    out[i] = v;
                }
            }
        }
    }
}
