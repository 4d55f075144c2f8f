//! Multivariate tensor-product quadrature grids and their rotation onto a
//! target multivariate normal.
//!
//! A standard-normal product grid `z` is mapped to `mean + S z`, where `S` is
//! a square root of the covariance: the lower Cholesky factor, or the
//! symmetric root `Q Λ^{1/2} Qᵀ` from the eigendecomposition. Both give
//! rotated points whose weighted first and second moments match the target
//! exactly once K ≥ 2. The weights are never touched.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad_rules::{compute_normalized_rule, Rule1D, RuleKind};
use crate::sum::CompensatedSum;

pub const DEFAULT_POINT_BUDGET: u64 = 10_000_000;

/// Mean vector and positive-definite covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovSpecRepr", into = "CovSpecRepr")]
pub struct CovSpec {
    mean: Vec<f64>,
    // row-major D×D
    covariance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovSpecRepr {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<CovSpecRepr> for CovSpec {
    type Error = Error;
    fn try_from(r: CovSpecRepr) -> Result<Self> {
        CovSpec::new(r.mean, r.covariance)
    }
}

impl From<CovSpec> for CovSpecRepr {
    fn from(c: CovSpec) -> Self {
        let d = c.dim();
        CovSpecRepr {
            covariance: c.covariance.chunks(d).map(|r| r.to_vec()).collect(),
            mean: c.mean,
        }
    }
}

impl CovSpec {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty mean vector".into()));
        }
        if covariance.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.len(),
            });
        }
        for row in &covariance {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        if mean.iter().chain(covariance.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mean or covariance entry".into()));
        }
        let spec = CovSpec {
            mean,
            covariance: covariance.into_iter().flatten().collect(),
        };
        let mut asym = 0.0f64;
        for i in 0..d {
            for j in 0..i {
                asym = asym.max((spec.cov(i, j) - spec.cov(j, i)).abs());
            }
        }
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        let min_eig = spec.eigen().0.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(spec)
    }

    pub fn standard(dim: usize) -> Result<Self> {
        let cov = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        CovSpec::new(vec![0.0; dim], cov)
    }

    /// Zero-mean, unit-variance pair with correlation `rho`.
    pub fn unit_correlation(rho: f64) -> Result<Self> {
        CovSpec::new(vec![0.0, 0.0], vec![vec![1.0, rho], vec![rho, 1.0]])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.dim() + j]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.covariance)
    }

    /// Eigenvalues sorted descending with eigenvectors as columns; each
    /// eigenvector's first nonzero component is made positive.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.dim();
        let eig = SymmetricEigen::new(self.matrix());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-14) {
                if *first < 0.0 {
                    v = -v;
                }
            }
            vectors.set_column(col, &v);
        }
        (values, vectors)
    }

    /// Lower-triangular L with L Lᵀ = Σ.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        nalgebra::Cholesky::new(self.matrix())
            .expect("covariance validated positive definite")
            .l()
    }

    /// Symmetric S with S S = Σ.
    pub fn symmetric_sqrt(&self) -> DMatrix<f64> {
        let (values, q) = self.eigen();
        let root = DVector::from_iterator(values.len(), values.iter().map(|v| v.sqrt()));
        &q * DMatrix::from_diagonal(&root) * q.transpose()
    }

    /// Square-root factor used for a given decomposition. `NoRotation` keeps
    /// only the marginal standard deviations.
    pub fn factor(&self, decomposition: Decomposition) -> DMatrix<f64> {
        match decomposition {
            Decomposition::NoRotation => {
                let d = self.dim();
                DMatrix::from_fn(d, d, |i, j| if i == j { self.cov(i, i).sqrt() } else { 0.0 })
            }
            Decomposition::Cholesky => self.cholesky_factor(),
            Decomposition::Spectral => self.symmetric_sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    #[serde(rename = "none")]
    NoRotation,
    Cholesky,
    #[default]
    Spectral,
}

impl Decomposition {
    pub fn name(&self) -> &'static str {
        match self {
            Decomposition::NoRotation => "none",
            Decomposition::Cholesky => "cholesky",
            Decomposition::Spectral => "spectral",
        }
    }
}

impl std::str::FromStr for Decomposition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Decomposition::NoRotation),
            "cholesky" => Ok(Decomposition::Cholesky),
            "spectral" => Ok(Decomposition::Spectral),
            other => Err(Error::InvalidParameter(format!(
                "unknown decomposition '{other}' (expected none, cholesky or spectral)"
            ))),
        }
    }
}

/// Weighted point set in D dimensions; `points` is row-major (one row per
/// point), the last coordinate varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridND {
    pub dim: usize,
    pub level: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub decomposition: Decomposition,
    pub cov: Option<CovSpec>,
    #[serde(skip)]
    standard_normal: bool,
}

fn check_budget(level: usize, dim: usize, budget: u64) -> Result<u64> {
    let points = (level as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if points > budget as u128 {
        return Err(Error::PointBudgetExceeded {
            level,
            dim,
            points,
            budget,
        });
    }
    Ok(points as u64)
}

impl GridND {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    /// One-dimensional grid from a normalized rule.
    pub fn from_rule(rule: &Rule1D) -> GridND {
        let rule = rule.normalize();
        GridND {
            dim: 1,
            level: rule.level,
            standard_normal: false,
            points: rule.nodes,
            weights: rule.weights,
            decomposition: Decomposition::NoRotation,
            cov: None,
        }
    }

    /// Cartesian product of independent grids; coordinates are concatenated
    /// and weights multiplied.
    pub fn product(parts: &[GridND], budget: u64) -> Result<GridND> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("product of zero grids".into()));
        }
        let total: u128 = parts.iter().map(|g| g.len() as u128).product();
        let dim: usize = parts.iter().map(|g| g.dim).sum();
        if total > budget as u128 {
            return Err(Error::PointBudgetExceeded {
                level: parts.iter().map(|g| g.level).max().unwrap_or(0),
                dim,
                points: total,
                budget,
            });
        }
        let mut points = vec![1.0; 0];
        let mut weights = vec![1.0];
        points.reserve(total as usize * dim);
        let mut cur_dim = 0;
        for part in parts {
            let mut next_points = Vec::with_capacity(weights.len() * part.len() * (cur_dim + part.dim));
            let mut next_weights = Vec::with_capacity(weights.len() * part.len());
            for (i, w) in weights.iter().enumerate() {
                let prefix = &points[i * cur_dim..(i + 1) * cur_dim];
                for (p, pw) in part.iter() {
                    next_points.extend_from_slice(prefix);
                    next_points.extend_from_slice(p);
                    next_weights.push(w * pw);
                }
            }
            points = next_points;
            weights = next_weights;
            cur_dim += part.dim;
        }
        let uniform_level = parts.windows(2).all(|p| p[0].level == p[1].level);
        Ok(GridND {
            dim,
            level: if uniform_level { parts[0].level } else { 0 },
            points,
            weights,
            decomposition: Decomposition::NoRotation,
            cov: None,
            standard_normal: parts.iter().all(|p| p.standard_normal),
        })
    }

    /// Weighted mean and covariance of the point cloud.
    pub fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut mean = vec![0.0; d];
        for (p, w) in self.iter() {
            for k in 0..d {
                mean[k] += w * p[k];
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for (p, w) in self.iter() {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += w * (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        (mean, cov)
    }
}

fn standard_normal_rule(level: usize) -> Result<Rule1D> {
    let mut rule = compute_normalized_rule(RuleKind::Hermite, level)?;
    let s = std::f64::consts::SQRT_2;
    rule.nodes.iter_mut().for_each(|x| *x *= s);
    Ok(rule)
}

/// Standard-normal product grid with `level^dim` points.
pub fn tensor_grid(level: usize, dim: usize) -> Result<GridND> {
    tensor_grid_with_budget(level, dim, DEFAULT_POINT_BUDGET)
}

pub fn tensor_grid_with_budget(level: usize, dim: usize, budget: u64) -> Result<GridND> {
    if dim == 0 {
        return Err(Error::InvalidParameter("grid dimension must be at least 1".into()));
    }
    check_budget(level, dim, budget)?;
    let rule = standard_normal_rule(level)?;
    let mut axis = GridND::from_rule(&rule);
    axis.standard_normal = true;
    let parts = vec![axis; dim];
    let mut grid = GridND::product(&parts, budget)?;
    grid.level = level;
    Ok(grid)
}

/// Maps an unrotated standard-normal grid onto N(cov.mean, cov.covariance).
pub fn rotate_grid(grid: &GridND, cov: &CovSpec, decomposition: Decomposition) -> Result<GridND> {
    if cov.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: cov.dim(),
        });
    }
    if !grid.standard_normal {
        return Err(Error::InvalidParameter(
            "only an unrotated standard-normal grid can be rotated".into(),
        ));
    }
    let d = grid.dim;
    let s = cov.factor(decomposition);
    let mean = cov.mean();
    let mut points = Vec::with_capacity(grid.points.len());
    for z in grid.points.chunks_exact(d) {
        for i in 0..d {
            let mut v = mean[i];
            for (j, zj) in z.iter().enumerate() {
                v += s[(i, j)] * zj;
            }
            points.push(v);
        }
    }
    Ok(GridND {
        dim: d,
        level: grid.level,
        points,
        weights: grid.weights.clone(),
        decomposition,
        cov: Some(cov.clone()),
        standard_normal: false,
    })
}

/// `Σ_p w_p f(x_p)` with compensated summation in point order.
pub fn integrate_nd<F: Fn(&[f64]) -> f64>(grid: &GridND, f: F) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (p, w) in grid.iter() {
        let v = f(p);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                point: p.to_vec(),
                value: v,
            });
        }
        acc.add(w * v);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::expit;

    #[test]
    fn single_point_grid() {
        let g = tensor_grid(1, 3).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), &[0.0, 0.0, 0.0]);
        assert!((g.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn twenty_five_points() {
        let g = tensor_grid(5, 2).unwrap();
        assert_eq!(g.len(), 25);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-11);
        assert!(g.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn odd_product_moment_vanishes() {
        let g = tensor_grid(3, 2).unwrap();
        assert!(integrate_nd(&g, |p| p[0] * p[1]).unwrap().abs() < 1e-15);
        assert!((integrate_nd(&g, |_| 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn budget_error_names_count() {
        match tensor_grid_with_budget(10, 8, 1_000_000) {
            Err(Error::PointBudgetExceeded { points, .. }) => assert_eq!(points, 100_000_000),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_spectral_is_noop() {
        let g = tensor_grid(5, 2).unwrap();
        let r = rotate_grid(&g, &CovSpec::standard(2).unwrap(), Decomposition::Spectral).unwrap();
        for (a, b) in r.points.iter().zip(&g.points) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(r.weights, g.weights);
    }

    #[test]
    fn unit_correlation_spectral_and_cholesky_formulas() {
        let rho = 0.5f64.sqrt();
        let g = tensor_grid(5, 2).unwrap();
        let cov = CovSpec::unit_correlation(rho).unwrap();
        let a = 0.5 * ((1.0 + rho).sqrt() + (1.0 - rho).sqrt());
        let b = 0.5 * ((1.0 + rho).sqrt() - (1.0 - rho).sqrt());
        let spec = rotate_grid(&g, &cov, Decomposition::Spectral).unwrap();
        let chol = rotate_grid(&g, &cov, Decomposition::Cholesky).unwrap();
        let rp = (1.0 - rho * rho).sqrt();
        for i in 0..g.len() {
            let z = g.point(i);
            let s = spec.point(i);
            assert!((s[0] - (a * z[0] + b * z[1])).abs() < 1e-12);
            assert!((s[1] - (b * z[0] + a * z[1])).abs() < 1e-12);
            let c = chol.point(i);
            assert!((c[0] - z[0]).abs() < 1e-12);
            assert!((c[1] - (rho * z[0] + rp * z[1])).abs() < 1e-12);
        }
        let (_, m) = spec.moments();
        assert!((m[0][1] - rho).abs() < 1e-14 && (m[0][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_two_point_moments() {
        let g = tensor_grid(2, 2).unwrap();
        let cov = CovSpec::new(vec![-5.0, -10.0], vec![vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = rotate_grid(&g, &cov, Decomposition::Cholesky).unwrap();
        // direct summation over the four points
        let mut m = [0.0; 2];
        for (p, w) in r.iter() {
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
        let mut c = [[0.0; 2]; 2];
        for (p, w) in r.iter() {
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += w * (p[i] - m[i]) * (p[j] - m[j]);
                }
            }
        }
        assert!((m[0] + 5.0).abs() < 1e-12 && (m[1] + 10.0).abs() < 1e-12);
        let expected = [[1.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_rotation_ignores_correlation() {
        let g = tensor_grid(4, 2).unwrap();
        let cov = CovSpec::new(vec![1.0, 2.0], vec![vec![4.0, 1.0], vec![1.0, 9.0]]).unwrap();
        let r = rotate_grid(&g, &cov, Decomposition::NoRotation).unwrap();
        let (m, c) = r.moments();
        assert!((m[0] - 1.0).abs() < 1e-14 && (m[1] - 2.0).abs() < 1e-14);
        assert!((c[0][0] - 4.0).abs() < 1e-13 && (c[1][1] - 9.0).abs() < 1e-13);
        assert!(c[0][1].abs() < 1e-14);
    }

    #[test]
    fn linearity_in_three_dimensions() {
        let g = tensor_grid(3, 3).unwrap();
        let cov = CovSpec::new(
            vec![1.0, -2.0, 0.5],
            vec![vec![2.0, 0.3, 0.1], vec![0.3, 1.0, -0.2], vec![0.1, -0.2, 0.5]],
        )
        .unwrap();
        let r = rotate_grid(&g, &cov, Decomposition::Spectral).unwrap();
        let s = integrate_nd(&r, |p| p.iter().sum()).unwrap();
        assert!((s + 0.5).abs() < 1e-13);
    }

    #[test]
    fn invalid_covariances() {
        assert!(matches!(
            CovSpec::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(Error::NotPositiveDefinite { min_eigenvalue }) if (min_eigenvalue + 1.0).abs() < 1e-12
        ));
        assert!(matches!(
            CovSpec::new(vec![0.0, 0.0], vec![vec![1.0, 0.2], vec![0.3, 1.0]]),
            Err(Error::NotSymmetric(_))
        ));
        assert!(CovSpec::new(vec![0.0], vec![vec![1.0, 0.0]]).is_err());
        let g = tensor_grid(3, 3).unwrap();
        assert!(matches!(
            rotate_grid(&g, &CovSpec::standard(2).unwrap(), Decomposition::Spectral),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nonfinite_reports_point() {
        let g = tensor_grid(1, 2).unwrap();
        match integrate_nd(&g, |_| f64::INFINITY) {
            Err(Error::NonFiniteEvaluation { point, .. }) => assert_eq!(point, vec![0.0, 0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spectral_and_cholesky_agree_on_smooth_integrand() {
        let g = tensor_grid(20, 2).unwrap();
        let cov = CovSpec::new(vec![-5.0, -10.0], vec![vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = |p: &[f64]| expit(1.0 + 0.1 * p[0] + 0.1 * p[1]);
        let a = integrate_nd(&rotate_grid(&g, &cov, Decomposition::Spectral).unwrap(), f).unwrap();
        let b = integrate_nd(&rotate_grid(&g, &cov, Decomposition::Cholesky).unwrap(), f).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn covspec_json_roundtrip_and_validation() {
        let c: CovSpec =
            serde_json::from_str(r#"{"mean":[1,2],"covariance":[[1,0.5],[0.5,2]]}"#).unwrap();
        assert_eq!(c.cov(0, 1), 0.5);
        let back: CovSpec = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<CovSpec>(r#"{"mean":[0,0],"covariance":[[1,2],[2,1]]}"#).is_err());
    }
}
