//! Univariate Gaussian quadrature rules.
//!
//! Each rule integrates against one of four kernels:
//!
//! | kind                 | kernel            | support   | matching distribution |
//! |----------------------|-------------------|-----------|-----------------------|
//! | `Hermite`            | `exp(-x²)`        | ℝ         | Normal                |
//! | `Legendre`           | `1`               | [-1, 1]   | Uniform               |
//! | `Laguerre`           | `exp(-x)`         | [0, ∞)    | Exponential           |
//! | `GenLaguerre(α)`     | `x^α exp(-x)`     | [0, ∞)    | Gamma (α = shape − 1) |
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix built
//! from each family's three-term recurrence. They are polished with a Newton
//! step on the recurrence, and the weights are the Christoffel numbers
//! `1 / Σ_k p̃_k(x_i)²` of the orthonormal polynomials. This is equivalent to
//! the squared first eigenvector component, but keeps full relative accuracy
//! for the tiny weights at the outermost nodes.

use serde::{Deserialize, Serialize};

use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Largest supported number of nodes.
pub const MAX_LEVEL: usize = 64;
/// Beyond this level the rule is already accurate to machine precision for
/// smooth integrands; callers may want to warn.
pub const WARN_LEVEL: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleKind {
    Hermite,
    Legendre,
    Laguerre,
    #[serde(rename = "genlaguerre")]
    GenLaguerre { alpha: f64 },
}

impl RuleKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RuleKind::GenLaguerre { alpha } if !(alpha > -1.0 && alpha.is_finite()) => {
                Err(Error::InvalidAlpha(alpha))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RuleKind::Hermite => "hermite".into(),
            RuleKind::Legendre => "legendre".into(),
            RuleKind::Laguerre => "laguerre".into(),
            RuleKind::GenLaguerre { alpha } => format!("genlaguerre(alpha={alpha})"),
        }
    }

    fn laguerre_alpha(&self) -> Option<f64> {
        match *self {
            RuleKind::Laguerre => Some(0.0),
            RuleKind::GenLaguerre { alpha } => Some(alpha),
            _ => None,
        }
    }

    fn is_symmetric(&self) -> bool {
        matches!(self, RuleKind::Hermite | RuleKind::Legendre)
    }

    /// Recurrence coefficients (a_k, b_k) of the monic orthogonal polynomials:
    /// p_{k+1}(x) = (x − a_k) p_k(x) − b_k p_{k−1}(x).
    fn recurrence(&self, k: usize) -> (f64, f64) {
        let kf = k as f64;
        match *self {
            RuleKind::Hermite => (0.0, kf / 2.0),
            RuleKind::Legendre => (0.0, kf * kf / (4.0 * kf * kf - 1.0)),
            RuleKind::Laguerre => (2.0 * kf + 1.0, kf * kf),
            RuleKind::GenLaguerre { alpha } => (2.0 * kf + alpha + 1.0, kf * (kf + alpha)),
        }
    }

    /// Integral of the kernel over its support.
    pub fn total_mass(&self) -> f64 {
        match *self {
            RuleKind::Hermite => std::f64::consts::PI.sqrt(),
            RuleKind::Legendre => 2.0,
            RuleKind::Laguerre => 1.0,
            RuleKind::GenLaguerre { alpha } => statrs::function::gamma::gamma(alpha + 1.0),
        }
    }
}

/// A K-point quadrature rule.
///
/// Raw rules integrate against the kernel itself; normalized rules (weights
/// summing to one) integrate against the kernel's probability density, after
/// any rescaling to a distribution's parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule1D {
    pub kind: RuleKind,
    pub level: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weights divided by the kernel mass; nodes unchanged.
    pub fn normalize(&self) -> Rule1D {
        if self.normalized {
            return self.clone();
        }
        let mass = self.kind.total_mass();
        Rule1D {
            weights: self.weights.iter().map(|w| w / mass).collect(),
            normalized: true,
            ..self.clone()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

fn check_level(level: usize) -> Result<()> {
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::InvalidLevel(level));
    }
    Ok(())
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-type shifts. `off[i]` couples rows i and i+1; `off` must have the
/// same length as `diag` (last entry ignored).
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n > 0 {
        off[n - 1] = 0.0;
    }
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 100 {
                return Err(Error::Domain(
                    "Jacobi matrix eigenvalue iteration did not converge".into(),
                ));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Values of the orthonormal-up-to-scale polynomials at `x`: returns
/// (p_K(x), p_K'(x), Σ_{k<K} p_k(x)²) with p_0 = 1.
fn recurrence_eval(kind: &RuleKind, level: usize, x: f64) -> (f64, f64, f64) {
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    let mut sumsq = 0.0;
    let mut beta_k = 0.0;
    for k in 0..level {
        sumsq += p * p;
        let (a_k, _) = kind.recurrence(k);
        let beta_next = kind.recurrence(k + 1).1.sqrt();
        let p_next = ((x - a_k) * p - beta_k * p_prev) / beta_next;
        let d_next = (p + (x - a_k) * d - beta_k * d_prev) / beta_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        beta_k = beta_next;
    }
    (p, d, sumsq)
}

/// Builds the raw K-point rule for `kind`.
///
/// Exact for polynomials of degree ≤ 2K − 1 against the kernel.
pub fn compute_rule(kind: RuleKind, level: usize) -> Result<Rule1D> {
    let normalized = compute_normalized_rule(kind, level)?;
    let mass = kind.total_mass();
    Ok(Rule1D {
        weights: normalized.weights.iter().map(|w| w * mass).collect(),
        normalized: false,
        ..normalized
    })
}

/// Builds the K-point rule with weights normalized to sum to one.
pub fn compute_normalized_rule(kind: RuleKind, level: usize) -> Result<Rule1D> {
    kind.validate()?;
    check_level(level)?;

    let mut diag: Vec<f64> = (0..level).map(|k| kind.recurrence(k).0).collect();
    let mut off: Vec<f64> = (1..=level).map(|k| kind.recurrence(k).1.sqrt()).collect();
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    let mut nodes = diag;
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let (p, dp, _) = recurrence_eval(&kind, level, *x);
            if dp == 0.0 || !p.is_finite() || !dp.is_finite() {
                break;
            }
            let step = p / dp;
            if step.abs() > 1e-6 * (1.0 + x.abs()) {
                break;
            }
            *x -= step;
        }
    }

    if kind.is_symmetric() {
        for i in 0..level / 2 {
            let j = level - 1 - i;
            let h = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -h;
            nodes[j] = h;
        }
        if level % 2 == 1 {
            nodes[level / 2] = 0.0;
        }
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / recurrence_eval(&kind, level, x).2)
        .collect();
    if kind.is_symmetric() {
        for i in 0..level / 2 {
            let j = level - 1 - i;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
    }

    Ok(Rule1D {
        kind,
        level,
        nodes,
        weights,
        normalized: true,
    })
}

/// Maps a rule onto the distribution matching its kernel, returning a
/// normalized rule whose weighted sum approximates `E[f(X)]`.
pub fn rescale_rule(rule: &Rule1D, dist: &Dist) -> Result<Rule1D> {
    dist.validate()?;
    let mismatch = || Error::KindMismatch {
        kind: rule.kind.name(),
        dist: dist.name().into(),
    };
    let (scale, shift) = match (dist, rule.kind.laguerre_alpha()) {
        (&Dist::Normal { mu, sigma2 }, _) if rule.kind == RuleKind::Hermite => {
            ((2.0 * sigma2).sqrt(), mu)
        }
        (&Dist::Uniform { a, b }, _) if rule.kind == RuleKind::Legendre => {
            (0.5 * (b - a), 0.5 * (a + b))
        }
        (&Dist::Exponential { rate }, Some(0.0)) => (1.0 / rate, 0.0),
        (&Dist::Gamma { shape, rate }, Some(alpha)) if (alpha - (shape - 1.0)).abs() <= 1e-12 => {
            (1.0 / rate, 0.0)
        }
        _ => return Err(mismatch()),
    };
    let base = rule.normalize();
    Ok(Rule1D {
        nodes: base.nodes.iter().map(|x| shift + scale * x).collect(),
        ..base
    })
}

/// `Σ w_i f(x_i)` over a normalized rule.
pub fn integrate_1d<F: Fn(f64) -> f64>(rule: &Rule1D, f: F) -> Result<f64> {
    if !rule.normalized {
        return Err(Error::InvalidParameter(
            "integrate_1d expects a normalized rule".into(),
        ));
    }
    let mut acc = CompensatedSum::new();
    for (x, w) in rule.iter() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                point: vec![x],
                value: v,
            });
        }
        acc.add(w * v);
    }
    Ok(acc.value())
}
