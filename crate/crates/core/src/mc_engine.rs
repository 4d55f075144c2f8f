//! Monte Carlo baselines: potential-outcome simulation and MC integration.
//!
//! Repetition `r` draws from `ChaCha8Rng::seed_from_u64(seed_base + r)`, so
//! a summary depends only on the scenario and the config, never on the
//! number of worker threads.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{seeded_rng, Sampler};
use crate::error::{Error, Result};
use crate::scenarios::{
    fmt_float, CdeScenario, ConfoundingScenario, HrScenario, Method, RmstScenario, Scenario, TruthResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// 2.5% and 97.5% sample quantiles of the per-rep estimates.
    #[default]
    Empirical,
    /// mean ± 1.96 sd.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_samples: usize,
    pub n_reps: usize,
    pub seed_base: u64,
    #[serde(default)]
    pub interval: IntervalKind,
}

impl MCConfig {
    pub fn new(n_samples: usize, n_reps: usize, seed_base: u64) -> Result<Self> {
        let c = MCConfig {
            n_samples,
            n_reps,
            seed_base,
            interval: IntervalKind::Empirical,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_samples must be at least 2 (got {})",
                self.n_samples
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.seed_base.wrapping_add(rep as u64)
    }
}

/// Repetition-level summary of one estimand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCSummary {
    pub estimand: String,
    pub t: Option<f64>,
    pub method: Method,
    pub seed_base: u64,
    /// One estimate per repetition.
    pub estimates: Vec<f64>,
    /// Standard error of each rep's estimate from the dispersion of its own
    /// draws (delta method for ratios).
    pub within_se: Vec<f64>,
    pub mean: f64,
    /// Standard deviation of the per-rep estimates (0 for a single rep).
    pub sd: f64,
    /// SE of `mean`: sd/√R, or the within-rep SE when R = 1.
    pub se_mean: f64,
    pub interval: (f64, f64),
    /// Wall time of each repetition (all estimands of the rep together).
    pub rep_seconds: Vec<f64>,
}

pub const REP_CSV_HEADER: &str = "scenario,estimand,t,method,n_samples,rep,seed,estimate,within_se,seconds";
pub const SUMMARY_CSV_HEADER: &str =
    "scenario,estimand,t,method,n_samples,n_reps,pooled_samples,mean,sd,se_mean,lower,upper,mean_seconds";

impl MCSummary {
    pub fn n_samples(&self) -> usize {
        self.method.size()
    }

    pub fn mean_seconds(&self) -> f64 {
        self.rep_seconds.iter().sum::<f64>() / self.rep_seconds.len() as f64
    }

    pub fn rep_rows(&self, scenario: &str) -> Vec<String> {
        self.estimates
            .iter()
            .zip(&self.within_se)
            .zip(&self.rep_seconds)
            .enumerate()
            .map(|(r, ((e, se), s))| {
                format!(
                    "{scenario},{},{},{},{},{r},{},{},{},{}",
                    self.estimand,
                    self.t.map(fmt_float).unwrap_or_default(),
                    self.method.label(),
                    self.n_samples(),
                    self.seed_base.wrapping_add(r as u64),
                    fmt_float(*e),
                    fmt_float(*se),
                    fmt_float(*s)
                )
            })
            .collect()
    }

    pub fn summary_row(&self, scenario: &str) -> String {
        let r = self.estimates.len();
        format!(
            "{scenario},{},{},{},{},{r},{},{},{},{},{},{},{}",
            self.estimand,
            self.t.map(fmt_float).unwrap_or_default(),
            self.method.label(),
            self.n_samples(),
            self.n_samples() as u128 * r as u128,
            fmt_float(self.mean),
            fmt_float(self.sd),
            fmt_float(self.se_mean),
            fmt_float(self.interval.0),
            fmt_float(self.interval.1),
            fmt_float(self.mean_seconds())
        )
    }
}

/// Quantile with linear interpolation between order statistics
/// (R's default, "type 7").
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Streaming mean and co-moment matrix (Welford).
#[derive(Debug, Clone)]
pub struct Moments {
    n: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
    delta: Vec<f64>,
}

impl Moments {
    pub fn new(k: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; k],
            comoment: vec![0.0; k * k],
            delta: vec![0.0; k],
        }
    }

    #[inline]
    #[allow(clippy::needless_range_loop)]
    pub fn push(&mut self, x: &[f64]) {
        let k = self.mean.len();
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for i in 0..k {
            self.delta[i] = x[i] - self.mean[i];
            self.mean[i] += self.delta[i] * inv;
        }
        for i in 0..k {
            let after = x[i] - self.mean[i];
            for j in 0..=i {
                self.comoment[i * k + j] += self.delta[j] * after;
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Sample covariance of components i and j.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let k = self.mean.len();
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        self.comoment[a * k + b] / (self.n as f64 - 1.0)
    }

    /// Standard error of `Σ g_i · mean_i`.
    pub fn linear_se(&self, g: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, gi) in g.iter().enumerate() {
            if *gi == 0.0 {
                continue;
            }
            for (j, gj) in g.iter().enumerate() {
                v += gi * gj * self.cov(i, j);
            }
        }
        (v.max(0.0) / self.n as f64).sqrt()
    }
}

/// One estimand's value and within-rep SE.
#[derive(Debug, Clone, PartialEq)]
pub struct RepStat {
    pub name: String,
    pub t: Option<f64>,
    pub value: f64,
    pub se: f64,
}

impl RepStat {
    fn new(name: impl Into<String>, t: Option<f64>, value: f64, se: f64) -> Self {
        RepStat {
            name: name.into(),
            t,
            value,
            se,
        }
    }
}

/// Runs `cfg.n_reps` repetitions (in parallel when a rayon pool allows it)
/// and summarizes each estimand in the order the rep function emits them.
pub fn run_reps<F>(cfg: &MCConfig, method: Method, rep: F) -> Result<Vec<MCSummary>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Vec<RepStat>> + Sync,
{
    cfg.validate()?;
    let outputs: Vec<(Vec<RepStat>, f64)> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let mut rng = seeded_rng(cfg.rep_seed(r));
            let stats = rep(&mut rng)?;
            Ok((stats, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let first = &outputs[0].0;
    let seconds: Vec<f64> = outputs.iter().map(|o| o.1).collect();
    Ok(first
        .iter()
        .enumerate()
        .map(|(j, head)| {
            let estimates: Vec<f64> = outputs.iter().map(|o| o.0[j].value).collect();
            let within_se: Vec<f64> = outputs.iter().map(|o| o.0[j].se).collect();
            summarize(head, method, cfg, estimates, within_se, seconds.clone())
        })
        .collect())
}

fn summarize(
    head: &RepStat,
    method: Method,
    cfg: &MCConfig,
    estimates: Vec<f64>,
    within_se: Vec<f64>,
    rep_seconds: Vec<f64>,
) -> MCSummary {
    let r = estimates.len();
    let mean = estimates.iter().sum::<f64>() / r as f64;
    let sd = if r > 1 {
        (estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (r - 1) as f64).sqrt()
    } else {
        0.0
    };
    let se_mean = if r > 1 { sd / (r as f64).sqrt() } else { within_se[0] };
    let interval = match cfg.interval {
        IntervalKind::Empirical => {
            let mut s = estimates.clone();
            s.sort_by(f64::total_cmp);
            (quantile(&s, 0.025), quantile(&s, 0.975))
        }
        IntervalKind::Normal => {
            let half = 1.96 * if r > 1 { sd } else { within_se[0] };
            (mean - half, mean + half)
        }
    };
    MCSummary {
        estimand: head.name.clone(),
        t: head.t,
        method,
        seed_base: cfg.seed_base,
        estimates,
        within_se,
        mean,
        sd,
        se_mean,
        interval,
        rep_seconds,
    }
}

/// What an MC run estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum McTarget {
    /// `P(Y⁽ᵃ⁾ = 1)` for one arm.
    MarginalProb { a: u8 },
    /// Both marginal probabilities and the odds ratio.
    OddsRatio,
    /// Both arm means and the controlled direct effect.
    Cde,
    /// The three arm means and TE, NDE, NIE.
    Rmst,
    /// Counterfactual densities, survivals, hazards and the three hazard
    /// ratios at each listed time.
    Hr { times: Vec<f64> },
}

impl McTarget {
    pub fn default_for(s: &Scenario) -> McTarget {
        match s {
            Scenario::Confounding(_) => McTarget::OddsRatio,
            Scenario::Cde(_) => McTarget::Cde,
            Scenario::Rmst(_) => McTarget::Rmst,
            Scenario::Hr(h) => McTarget::Hr {
                times: h.t_grid.values(),
            },
        }
    }
}

/// Monte Carlo integration: average the integrand (an expected value) over
/// sampled integration variables.
pub fn mc_integration(s: &Scenario, target: &McTarget, cfg: &MCConfig) -> Result<Vec<MCSummary>> {
    s.validate()?;
    let method = Method::McIntegration {
        n_samples: cfg.n_samples,
        n_reps: cfg.n_reps,
    };
    match (s, target) {
        (Scenario::Confounding(c), McTarget::OddsRatio) => {
            run_reps(cfg, method, |rng| confounding_rep(c, cfg.n_samples, rng, false))
        }
        (Scenario::Confounding(c), McTarget::MarginalProb { a }) => {
            let name = arm_prob_name(*a)?;
            let all = run_reps(cfg, method, |rng| confounding_rep(c, cfg.n_samples, rng, false))?;
            Ok(all.into_iter().filter(|m| m.estimand == name).collect())
        }
        (Scenario::Cde(c), McTarget::Cde) => run_reps(cfg, method, |rng| Ok(cde_rep(c, cfg.n_samples, rng))),
        (Scenario::Rmst(r), McTarget::Rmst) => run_reps(cfg, method, |rng| Ok(rmst_rep(r, cfg.n_samples, rng))),
        (Scenario::Hr(h), McTarget::Hr { times }) => {
            if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(Error::InvalidParameter("MC times must be positive".into()));
            }
            run_reps(cfg, method, |rng| hr_rep(h, times, cfg.n_samples, rng))
        }
        (s, t) => Err(Error::EstimandMismatch(format!(
            "target {t:?} is not defined for a {} scenario",
            s.kind()
        ))),
    }
}

fn arm_prob_name(a: u8) -> Result<&'static str> {
    match a {
        0 => Ok("p0"),
        1 => Ok("p1"),
        _ => Err(Error::InvalidParameter(format!("a must be 0 or 1 (got {a})"))),
    }
}

/// Potential-outcome simulation of `P(Y⁽ᵃ⁾ = 1)`.
pub fn potential_outcome_sim(s: &ConfoundingScenario, a: u8, cfg: &MCConfig) -> Result<MCSummary> {
    let name = arm_prob_name(a)?;
    let all = potential_outcome_odds_ratio(s, cfg)?;
    Ok(all.into_iter().find(|m| m.estimand == name).expect("arm estimand present"))
}

/// Potential-outcome simulation of both arms and the odds ratio. Each row
/// draws one confounder value and a Bernoulli outcome under each arm.
pub fn potential_outcome_odds_ratio(s: &ConfoundingScenario, cfg: &MCConfig) -> Result<Vec<MCSummary>> {
    s.validate()?;
    let method = Method::PotentialOutcomeSim {
        n_samples: cfg.n_samples,
        n_reps: cfg.n_reps,
    };
    run_reps(cfg, method, |rng| confounding_rep(s, cfg.n_samples, rng, true))
}

fn draw_confounders(samplers: &[Sampler], rng: &mut ChaCha8Rng, c: &mut [f64], scratch: &mut [f64]) {
    let mut off = 0;
    for sm in samplers {
        let d = sm.dim();
        sm.fill(rng, &mut c[off..off + d], scratch);
        off += d;
    }
}

fn confounding_rep(s: &ConfoundingScenario, n: usize, rng: &mut ChaCha8Rng, outcomes: bool) -> Result<Vec<RepStat>> {
    let samplers = s
        .confounders()
        .iter()
        .map(|d| d.sampler())
        .collect::<Result<Vec<_>>>()?;
    let mut c = vec![0.0; s.dim()];
    let mut scratch = vec![0.0; s.dim()];
    let mut acc = Moments::new(2);
    for _ in 0..n {
        draw_confounders(&samplers, rng, &mut c, &mut scratch);
        let p1 = s.outcome_prob(1, &c);
        let p0 = s.outcome_prob(0, &c);
        if outcomes {
            let y1 = (rng.random::<f64>() < p1) as u8 as f64;
            let y0 = (rng.random::<f64>() < p0) as u8 as f64;
            acc.push(&[y1, y0]);
        } else {
            acc.push(&[p1, p0]);
        }
    }
    let (p1, p0) = (acc.mean(0), acc.mean(1));
    let or = (p1 / (1.0 - p1)) / (p0 / (1.0 - p0));
    // delta method on log OR
    let g = [1.0 / (p1 * (1.0 - p1)), -1.0 / (p0 * (1.0 - p0))];
    Ok(vec![
        RepStat::new("p1", None, p1, acc.linear_se(&[1.0, 0.0])),
        RepStat::new("p0", None, p0, acc.linear_se(&[0.0, 1.0])),
        RepStat::new("odds_ratio", None, or, or * acc.linear_se(&g)),
    ])
}

fn cde_rep(s: &CdeScenario, n: usize, rng: &mut ChaCha8Rng) -> Vec<RepStat> {
    let (sc, su, sl) = (s.c.sigma2.sqrt(), s.u.sigma2.sqrt(), s.l_given_u.sigma2.sqrt());
    let lg = &s.l_given_u;
    let mut acc = Moments::new(2);
    for _ in 0..n {
        let c = s.c.mu + sc * rng.sample::<f64, _>(StandardNormal);
        let u = s.u.mu + su * rng.sample::<f64, _>(StandardNormal);
        let e: f64 = sl * rng.sample::<f64, _>(StandardNormal);
        let base = lg.intercept + lg.u_coef * u + e;
        let ya = s.outcome_mean(s.a, c, base + lg.a_coef * s.a as f64, u);
        let yb = s.outcome_mean(s.a_star, c, base + lg.a_coef * s.a_star as f64, u);
        acc.push(&[ya, yb]);
    }
    vec![
        RepStat::new("ey_a", None, acc.mean(0), acc.linear_se(&[1.0, 0.0])),
        RepStat::new("ey_a_star", None, acc.mean(1), acc.linear_se(&[0.0, 1.0])),
        RepStat::new("cde", None, acc.mean(0) - acc.mean(1), acc.linear_se(&[1.0, -1.0])),
    ]
}

/// Steps 3–5 of the RMST pseudocode: simulate M⁽¹⁾ and M⁽⁰⁾, evaluate the
/// three conditional RMSTs per subject, average and contrast.
fn rmst_rep(s: &RmstScenario, n: usize, rng: &mut ChaCha8Rng) -> Vec<RepStat> {
    let mut acc = Moments::new(3);
    for _ in 0..n {
        let m1 = s.mu1 + rng.sample::<f64, _>(StandardNormal);
        let m0 = s.mu0 + rng.sample::<f64, _>(StandardNormal);
        acc.push(&[s.conditional_rmst(1, m1), s.conditional_rmst(0, m0), s.conditional_rmst(1, m0)]);
    }
    let (m11, m00, m10) = (acc.mean(0), acc.mean(1), acc.mean(2));
    vec![
        RepStat::new("mu_1_1", None, m11, acc.linear_se(&[1.0, 0.0, 0.0])),
        RepStat::new("mu_0_0", None, m00, acc.linear_se(&[0.0, 1.0, 0.0])),
        RepStat::new("mu_1_0", None, m10, acc.linear_se(&[0.0, 0.0, 1.0])),
        RepStat::new("te", None, m11 - m00, acc.linear_se(&[1.0, -1.0, 0.0])),
        RepStat::new("nde", None, m10 - m00, acc.linear_se(&[0.0, -1.0, 1.0])),
        RepStat::new("nie", None, m11 - m10, acc.linear_se(&[1.0, 0.0, -1.0])),
    ]
}

/// Components per time, in order: f, S for (1,1), (1,0), (0,0).
fn hr_rep(s: &HrScenario, times: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<RepStat>> {
    let mu1 = s.alpha0 - s.alpha_a;
    let mu0 = s.alpha0;
    let pre: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let z = (t / s.lambda).powf(s.gamma - 1.0);
            (s.gamma / s.lambda * z, t / s.lambda * z)
        })
        .collect();
    let mut accs = vec![Moments::new(6); times.len()];
    let mut x = [0.0; 6];
    for _ in 0..n {
        let m1 = mu1 + rng.sample::<f64, _>(StandardNormal);
        let m0 = mu0 + rng.sample::<f64, _>(StandardNormal);
        let risks = [
            (s.beta_a + s.beta_m * m1).exp(),
            (s.beta_a + s.beta_m * m0).exp(),
            (s.beta_m * m0).exp(),
        ];
        for (acc, &(hz, cum)) in accs.iter_mut().zip(&pre) {
            for (k, r) in risks.iter().enumerate() {
                let surv = (-cum * r).exp();
                x[2 * k] = hz * r * surv;
                x[2 * k + 1] = surv;
            }
            acc.push(&x);
        }
    }
    let mut out = Vec::with_capacity(times.len() * 12);
    for (&t, acc) in times.iter().zip(&accs) {
        let mut h = [0.0; 3];
        let mut log_h_grad = [[0.0; 6]; 3];
        for (k, tag) in ["1_1", "1_0", "0_0"].iter().enumerate() {
            let (f, sv) = (acc.mean(2 * k), acc.mean(2 * k + 1));
            if !(sv > f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "simulated survival underflows at t = {t}; use a smaller time"
                )));
            }
            h[k] = f / sv;
            log_h_grad[k][2 * k] = 1.0 / f;
            log_h_grad[k][2 * k + 1] = -1.0 / sv;
            let mut gf = [0.0; 6];
            gf[2 * k] = 1.0;
            let mut gs = [0.0; 6];
            gs[2 * k + 1] = 1.0;
            out.push(RepStat::new(format!("f_{tag}"), Some(t), f, acc.linear_se(&gf)));
            out.push(RepStat::new(format!("s_{tag}"), Some(t), sv, acc.linear_se(&gs)));
            out.push(RepStat::new(format!("h_{tag}"), Some(t), h[k], h[k] * acc.linear_se(&log_h_grad[k])));
        }
        let diff = |a: usize, b: usize| -> [f64; 6] {
            let mut g = [0.0; 6];
            for i in 0..6 {
                g[i] = log_h_grad[a][i] - log_h_grad[b][i];
            }
            g
        };
        let [nde, nie, te] = [h[1] / h[2], h[0] / h[1], h[0] / h[2]];
        out.push(RepStat::new("nde", Some(t), nde, nde * acc.linear_se(&diff(1, 2))));
        out.push(RepStat::new("nie", Some(t), nie, nie * acc.linear_se(&diff(0, 1))));
        out.push(RepStat::new("te", Some(t), te, te * acc.linear_se(&diff(0, 2))));
    }
    Ok(out)
}

/// Quadrature (or closed form) against a Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub estimand: String,
    pub t: Option<f64>,
    pub truth: f64,
    pub truth_method: Method,
    pub mc_mean: f64,
    pub mc_method: Method,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub se_mean: f64,
    pub z_score: f64,
    pub interval: (f64, f64),
    pub inside_interval: bool,
}

pub const COMPARISON_CSV_HEADER: &str =
    "scenario,estimand,t,truth_method,truth,mc_method,n_samples,n_reps,mc_mean,abs_diff,rel_diff,se_mean,z_score,lower,upper,inside_interval";

impl Comparison {
    pub fn csv_row(&self, scenario: &str, n_reps: usize) -> String {
        format!(
            "{scenario},{},{},{},{},{},{},{n_reps},{},{},{},{},{},{},{},{}",
            self.estimand,
            self.t.map(fmt_float).unwrap_or_default(),
            self.truth_method.label(),
            fmt_float(self.truth),
            self.mc_method.label(),
            self.mc_method.size(),
            fmt_float(self.mc_mean),
            fmt_float(self.abs_diff),
            fmt_float(self.rel_diff),
            fmt_float(self.se_mean),
            fmt_float(self.z_score),
            fmt_float(self.interval.0),
            fmt_float(self.interval.1),
            self.inside_interval
        )
    }
}

pub fn compare(quad: &TruthResult, mc: &MCSummary) -> Result<Comparison> {
    let truth = quad
        .estimates
        .iter()
        .find(|e| e.name == mc.estimand && e.t == mc.t)
        .ok_or_else(|| {
            Error::EstimandMismatch(format!(
                "no '{}'{} in the {} result",
                mc.estimand,
                mc.t.map(|t| format!(" at t = {t}")).unwrap_or_default(),
                quad.scenario
            ))
        })?
        .value;
    let diff = truth - mc.mean;
    let z_score = if mc.se_mean > 0.0 {
        diff / mc.se_mean
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(Comparison {
        estimand: mc.estimand.clone(),
        t: mc.t,
        truth,
        truth_method: quad.method,
        mc_mean: mc.mean,
        mc_method: mc.method,
        abs_diff: diff.abs(),
        rel_diff: if truth != 0.0 { (diff / truth).abs() } else { diff.abs() },
        se_mean: mc.se_mean,
        z_score,
        interval: mc.interval,
        inside_interval: mc.interval.0 <= truth && truth <= mc.interval.1,
    })
}
