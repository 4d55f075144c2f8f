//! Convergence and runtime sweeps.
//!
//! Timed sections run one after another on a single-thread pool. Quadrature
//! timings include rule and grid construction.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{Decomposition, DEFAULT_POINT_BUDGET};
use crate::mc_engine::{mc_integration, MCConfig, McTarget};
use crate::scenarios::{fmt_float, ConfoundingScenario, Scenario, TruthResult};
use crate::special_fn::ClosedFormCase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Closed-form case used as the bias reference: exponential, uniform or gamma.
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_dim_level")]
    pub dim_level: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: Vec<usize>,
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    /// Runs per quadrature timing (median reported).
    #[serde(default = "default_timing_reps")]
    pub timing_reps: usize,
    /// Runs per MC timing (median reported).
    #[serde(default = "default_mc_timing_reps")]
    pub mc_timing_reps: usize,
    pub seed: u64,
}

fn default_scenario() -> String {
    "exponential".into()
}
fn default_levels() -> Vec<usize> {
    (1..=50).collect()
}
fn default_dims() -> Vec<usize> {
    (1..=10).collect()
}
fn default_dim_level() -> usize {
    3
}
fn default_mc_samples() -> Vec<usize> {
    vec![1_000_000]
}
fn default_mc_reps() -> usize {
    100
}
fn default_timing_reps() -> usize {
    21
}
fn default_mc_timing_reps() -> usize {
    5
}

impl SweepSpec {
    pub fn new(seed: u64) -> Self {
        SweepSpec {
            scenario: default_scenario(),
            levels: default_levels(),
            dims: default_dims(),
            dim_level: default_dim_level(),
            mc_samples: default_mc_samples(),
            mc_reps: default_mc_reps(),
            timing_reps: default_timing_reps(),
            mc_timing_reps: default_mc_timing_reps(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ascending = |v: &[usize]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]) && v[0] >= 1;
        if !ascending(&self.levels) {
            return Err(Error::InvalidParameter("levels must be non-empty, ascending and ≥ 1".into()));
        }
        if !ascending(&self.dims) {
            return Err(Error::InvalidParameter("dims must be non-empty, ascending and ≥ 1".into()));
        }
        if !self.mc_samples.is_empty() && !ascending(&self.mc_samples) {
            return Err(Error::InvalidParameter("mc_samples must be ascending".into()));
        }
        if self.dim_level == 0 || self.mc_reps == 0 || self.timing_reps == 0 || self.mc_timing_reps == 0 {
            return Err(Error::InvalidParameter("levels and repetition counts must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn case(&self) -> Result<ClosedFormCase> {
        match self.scenario.as_str() {
            "exponential" => Ok(ClosedFormCase::ExponentialCase),
            "uniform" => Ok(ClosedFormCase::UniformCase),
            "gamma" => Ok(ClosedFormCase::GammaCase),
            other => Err(Error::MissingReference(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub method: &'static str,
    /// K for quadrature, N for Monte Carlo.
    pub size: usize,
    pub estimand: String,
    pub value: f64,
    pub bias: f64,
    pub seconds: f64,
}

pub const CONVERGENCE_CSV_HEADER: &str = "method,size,estimand,value,bias,seconds";

impl ConvergenceRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.size,
            self.estimand,
            fmt_float(self.value),
            fmt_float(self.bias),
            fmt_float(self.seconds)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionRow {
    pub dim: usize,
    pub method: &'static str,
    /// K^D grid points, or N draws.
    pub points: u128,
    pub seconds: Option<f64>,
    pub skipped: bool,
}

pub const DIMENSION_CSV_HEADER: &str = "dim,method,points,seconds,skipped";

impl DimensionRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.dim,
            self.method,
            self.points,
            self.seconds.map(fmt_float).unwrap_or_default(),
            self.skipped
        )
    }
}

/// Median wall time of `reps` runs after one warm-up run.
pub fn median_seconds<T, F: FnMut() -> T>(reps: usize, mut f: F) -> f64 {
    std::hint::black_box(f());
    let mut t: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(f());
            start.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Bias of quadrature over the K range and of the MC mean at each N, both
/// against the closed form.
pub fn convergence_sweep(spec: &SweepSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let case = spec.case()?;
    let scenario = ConfoundingScenario::closed_form_example(case);
    let truth = scenario.closed_form_truth()?;
    let names = ["p1", "p0", "odds_ratio"];
    let mut rows = Vec::new();
    single_thread(|| -> Result<()> {
        for &k in &spec.levels {
            let q = scenario.odds_ratio_truth(k, Decomposition::Spectral)?;
            let secs = median_seconds(spec.timing_reps, || scenario.odds_ratio_truth(k, Decomposition::Spectral));
            for name in names {
                rows.push(bias_row("quadrature", k, name, &q, &truth, secs));
            }
        }
        Ok(())
    })??;
    let wrapped = Scenario::Confounding(scenario);
    for &n in &spec.mc_samples {
        let cfg = MCConfig::new(n, spec.mc_reps, spec.seed)?;
        let summaries = mc_integration(&wrapped, &McTarget::OddsRatio, &cfg)?;
        for m in summaries {
            let t = truth.get(&m.estimand).expect("closed form covers every MC estimand");
            rows.push(ConvergenceRow {
                method: "mc_integration",
                size: n,
                bias: (m.mean - t).abs(),
                value: m.mean,
                seconds: m.mean_seconds(),
                estimand: m.estimand,
            });
        }
    }
    Ok(rows)
}

fn bias_row(
    method: &'static str,
    size: usize,
    name: &str,
    est: &TruthResult,
    truth: &TruthResult,
    seconds: f64,
) -> ConvergenceRow {
    let v = est.get(name).expect("estimand present");
    ConvergenceRow {
        method,
        size,
        estimand: name.to_string(),
        value: v,
        bias: (v - truth.get(name).expect("estimand present")).abs(),
        seconds,
    }
}

/// Runtime of quadrature (K = `dim_level`) and of one MC-integration rep
/// (N = first of `mc_samples`) against the confounder dimension.
pub fn dimension_sweep(spec: &SweepSpec) -> Result<Vec<DimensionRow>> {
    spec.validate()?;
    let k = spec.dim_level;
    let n = spec.mc_samples.first().copied().unwrap_or(1_000_000);
    let mut rows = Vec::new();
    single_thread(|| -> Result<()> {
        for &d in &spec.dims {
            let s = ConfoundingScenario::dimension_example(d)?;
            let points = (k as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
            if points > DEFAULT_POINT_BUDGET as u128 {
                rows.push(DimensionRow {
                    dim: d,
                    method: "quadrature",
                    points,
                    seconds: None,
                    skipped: true,
                });
            } else {
                s.odds_ratio_truth(k, Decomposition::Spectral)?;
                let secs = median_seconds(spec.timing_reps, || s.odds_ratio_truth(k, Decomposition::Spectral));
                rows.push(DimensionRow {
                    dim: d,
                    method: "quadrature",
                    points,
                    seconds: Some(secs),
                    skipped: false,
                });
            }
            let wrapped = Scenario::Confounding(s);
            let cfg = MCConfig::new(n, 1, spec.seed)?;
            let secs = median_seconds(spec.mc_timing_reps, || mc_integration(&wrapped, &McTarget::OddsRatio, &cfg));
            rows.push(DimensionRow {
                dim: d,
                method: "mc_integration",
                points: n as u128,
                seconds: Some(secs),
                skipped: false,
            });
        }
        Ok(())
    })??;
    Ok(rows)
}
