//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numeric-domain
//! error (degenerate probability, survival underflow).

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    convergence_sweep, dimension_sweep, SweepSpec, CONVERGENCE_CSV_HEADER, DIMENSION_CSV_HEADER,
};
use crate::distributions::Dist;
use crate::error::Error;
use crate::grids::{rotate_grid, tensor_grid, CovSpec, Decomposition};
use crate::mc_engine::{
    compare, mc_integration, potential_outcome_odds_ratio, MCConfig, MCSummary, McTarget, COMPARISON_CSV_HEADER,
    REP_CSV_HEADER, SUMMARY_CSV_HEADER,
};
use crate::quad_rules::{compute_rule, rescale_rule, RuleKind, WARN_LEVEL};
use crate::scenarios::{fmt_float, Scenario, TruthResult, TRUTH_CSV_HEADER};
use config::{load_config, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "quadtruth", version, about = "True values of causal estimands by Gaussian quadrature")]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print or write a univariate rule as an index,node,weight table.
    Rule(RuleArgs),
    /// Print or write a (rotated) Gauss–Hermite product grid.
    Grid(GridArgs),
    /// Compute the quadrature truth for a scenario config.
    Truth(TruthArgs),
    /// Run Monte Carlo baselines for a scenario config.
    Mc(McArgs),
    /// Quadrature truth against Monte Carlo, one row per estimand.
    Compare(McArgs),
    /// Convergence and dimension sweeps.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Hermite,
    Legendre,
    Laguerre,
    Genlaguerre,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct RuleArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Number of nodes.
    #[arg(long = "k")]
    pub level: usize,
    /// Exponent of the generalized Laguerre kernel.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Rescale to N(mu, sigma2).
    #[arg(long, num_args = 2, value_names = ["MU", "SIGMA2"], group = "dist")]
    pub normal: Option<Vec<f64>>,
    /// Rescale to U(a, b).
    #[arg(long, num_args = 2, value_names = ["A", "B"], group = "dist")]
    pub uniform: Option<Vec<f64>>,
    /// Rescale to Exp(rate).
    #[arg(long, value_name = "RATE", group = "dist")]
    pub exponential: Option<f64>,
    /// Rescale to Gamma(shape, rate).
    #[arg(long, num_args = 2, value_names = ["SHAPE", "RATE"], group = "dist")]
    pub gamma: Option<Vec<f64>>,
    /// Divide the weights by the kernel mass.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecompositionArg {
    None,
    Cholesky,
    Spectral,
    All,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct GridArgs {
    /// Nodes per dimension.
    #[arg(long = "k")]
    pub level: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Two-dimensional unit-variance covariance with this correlation.
    #[arg(long, conflicts_with = "cov")]
    pub rho: Option<f64>,
    /// Covariance rows separated by ';', entries by ','.
    #[arg(long)]
    pub cov: Option<String>,
    /// Comma-separated mean vector (default zero).
    #[arg(long)]
    pub mean: Option<String>,
    #[arg(long, value_enum, default_value = "spectral")]
    pub decomposition: DecompositionArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured quadrature level.
    #[arg(long = "k")]
    pub level: Option<usize>,
    #[arg(long, value_parser = parse_decomposition)]
    pub decomposition: Option<Decomposition>,
    /// Use the closed form instead of quadrature (closed-form cases only).
    #[arg(long)]
    pub closed_form: bool,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Base seed; rep r uses seed + r. Required unless the config sets one.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "n")]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "k")]
    pub level: Option<usize>,
    #[arg(long, value_parser = parse_decomposition)]
    pub decomposition: Option<Decomposition>,
    /// Add potential-outcome simulation (confounding scenarios).
    #[arg(long)]
    pub potential_outcomes: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON sweep specification; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Closed-form reference: exponential, uniform or gamma.
    #[arg(long)]
    pub scenario: Option<String>,
    /// K values, e.g. `1..50` or `2,4,8`.
    #[arg(long, value_parser = parse_range)]
    pub levels: Option<IntList>,
    /// Dimensions, e.g. `1..10`.
    #[arg(long, value_parser = parse_range)]
    pub dims: Option<IntList>,
    /// Nodes per dimension in the dimension sweep.
    #[arg(long)]
    pub dim_level: Option<usize>,
    /// MC sample sizes, e.g. `1000000`.
    #[arg(long, value_parser = parse_range)]
    pub mc_samples: Option<IntList>,
    #[arg(long)]
    pub mc_reps: Option<usize>,
    #[arg(long)]
    pub timing_reps: Option<usize>,
    #[arg(long)]
    pub mc_timing_reps: Option<usize>,
    /// Run only one sweep.
    #[arg(long, value_enum)]
    pub only: Option<SweepKind>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Convergence,
    Dimension,
}

fn parse_decomposition(s: &str) -> Result<Decomposition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Integer list given as `a..b` (inclusive) or comma separated.
#[derive(Debug, Clone)]
pub struct IntList(pub Vec<usize>);

fn parse_range(s: &str) -> Result<IntList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(IntList((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()
        .map(IntList)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("'{x}': {e}")))
        })
        .collect()
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Domain(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_domain() {
            CliError::Domain(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match cli.command {
        Command::Rule(a) => cmd_rule(&a),
        Command::Grid(a) => cmd_grid(&a),
        Command::Truth(a) => cmd_truth(&a),
        Command::Mc(a) => cmd_mc(&a, false),
        Command::Compare(a) => cmd_mc(&a, true),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn warn_level(level: usize) {
    if level > WARN_LEVEL {
        eprintln!("warning: K = {level} exceeds {WARN_LEVEL}; results will not improve on double precision");
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn cmd_rule(a: &RuleArgs) -> CliResult<()> {
    let kind = match a.kind {
        KindArg::Hermite => RuleKind::Hermite,
        KindArg::Legendre => RuleKind::Legendre,
        KindArg::Laguerre => RuleKind::Laguerre,
        KindArg::Genlaguerre => RuleKind::GenLaguerre {
            alpha: a
                .alpha
                .ok_or_else(|| CliError::Validation("--alpha is required for genlaguerre".into()))?,
        },
    };
    if a.alpha.is_some() && !matches!(kind, RuleKind::GenLaguerre { .. }) {
        return Err(CliError::Validation("--alpha only applies to genlaguerre".into()));
    }
    warn_level(a.level);
    let dist = if let Some(v) = &a.normal {
        Some(Dist::normal(v[0], v[1])?)
    } else if let Some(v) = &a.uniform {
        Some(Dist::uniform(v[0], v[1])?)
    } else if let Some(r) = a.exponential {
        Some(Dist::exponential(r)?)
    } else if let Some(v) = &a.gamma {
        Some(Dist::gamma(v[0], v[1])?)
    } else {
        None
    };
    let raw = compute_rule(kind, a.level)?;
    let rule = match &dist {
        Some(d) => rescale_rule(&raw, d)?,
        None if a.normalize => raw.normalize(),
        None => raw,
    };
    let rows = rule
        .iter()
        .enumerate()
        .map(|(i, (x, w))| format!("{i},{},{}", fmt_float(x), fmt_float(w)));
    emit(a.out.as_deref(), &csv("index,node,weight", rows))
}

fn cmd_grid(a: &GridArgs) -> CliResult<()> {
    warn_level(a.level);
    let matrix: Vec<Vec<f64>> = if let Some(rho) = a.rho {
        if a.dim != 2 {
            return Err(CliError::Validation("--rho needs --dim 2".into()));
        }
        vec![vec![1.0, rho], vec![rho, 1.0]]
    } else if let Some(c) = &a.cov {
        c.split(';').map(parse_floats).collect::<CliResult<_>>()?
    } else {
        (0..a.dim)
            .map(|i| (0..a.dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let mean = match &a.mean {
        Some(m) => parse_floats(m)?,
        None => vec![0.0; matrix.len()],
    };
    let cov = CovSpec::new(mean, matrix)?;
    let d = cov.dim();
    let decomps = match a.decomposition {
        DecompositionArg::None => vec![Decomposition::NoRotation],
        DecompositionArg::Cholesky => vec![Decomposition::Cholesky],
        DecompositionArg::Spectral => vec![Decomposition::Spectral],
        DecompositionArg::All => vec![Decomposition::NoRotation, Decomposition::Cholesky, Decomposition::Spectral],
    };
    let base = tensor_grid(a.level, d)?;
    let mut header = String::from("decomposition,index");
    for i in 1..=d {
        header.push_str(&format!(",x{i}"));
    }
    header.push_str(",weight");
    let mut rows = Vec::new();
    for dec in decomps {
        let g = rotate_grid(&base, &cov, dec)?;
        for (i, (p, w)) in g.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|x| fmt_float(*x)).collect();
            rows.push(format!("{},{i},{},{}", dec.name(), coords.join(","), fmt_float(w)));
        }
    }
    emit(a.out.as_deref(), &csv(&header, rows))
}

fn load(path: &Path) -> CliResult<ScenarioConfig> {
    load_config(path).map_err(CliError::Validation)
}

fn out_dir(cli: Option<&PathBuf>, cfg: &ScenarioConfig) -> Option<PathBuf> {
    cli.cloned().or_else(|| cfg.output.dir.clone())
}

fn quadrature_truth(cfg: &ScenarioConfig, level: Option<usize>, dec: Option<Decomposition>) -> CliResult<TruthResult> {
    let level = level.unwrap_or(cfg.method.quadrature.level);
    warn_level(level);
    let dec = dec.unwrap_or(cfg.method.quadrature.decomposition);
    Ok(cfg.scenario.truth(&cfg.id, level, dec)?)
}

fn closed_form(cfg: &ScenarioConfig) -> CliResult<Option<TruthResult>> {
    match &cfg.scenario {
        Scenario::Confounding(s) if s.closed_form_case().is_some() => {
            let mut r = s.closed_form_truth()?;
            r.scenario = cfg.id.clone();
            Ok(Some(r))
        }
        Scenario::Cde(s) => Ok(s.identity_closed_form().map(|v| TruthResult {
            scenario: cfg.id.clone(),
            method: crate::scenarios::Method::ClosedForm,
            estimates: vec![crate::scenarios::Estimate::new("cde", v)],
        })),
        _ => Ok(None),
    }
}

fn json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn cmd_truth(a: &TruthArgs) -> CliResult<()> {
    let cfg = load(&a.config)?;
    let result = if a.closed_form {
        closed_form(&cfg)?.ok_or_else(|| CliError::Validation(Error::MissingReference(cfg.id.clone()).to_string()))?
    } else {
        quadrature_truth(&cfg, a.level, a.decomposition)?
    };
    if let Some(dir) = out_dir(a.out.as_ref(), &cfg) {
        write_atomic(&dir.join(format!("{}_truth.json", cfg.id)), &json(&result))?;
        write_atomic(&dir.join(format!("{}_truth.csv", cfg.id)), &csv(TRUTH_CSV_HEADER, result.csv_rows()))?;
    }
    print!("{}", json(&result));
    Ok(())
}

fn mc_config(a: &McArgs, cfg: &ScenarioConfig) -> CliResult<MCConfig> {
    let seed = a.seed.or(cfg.method.mc.seed).ok_or_else(|| {
        CliError::Validation("a seed is required: pass --seed or set method.mc.seed".into())
    })?;
    let mut c = MCConfig::new(
        a.n_samples.unwrap_or(cfg.method.mc.n_samples),
        a.reps.unwrap_or(cfg.method.mc.n_reps),
        seed,
    )?;
    c.interval = cfg.method.mc.interval;
    Ok(c)
}

/// All Monte Carlo summaries a config asks for.
pub fn run_mc(cfg: &ScenarioConfig, mc: &MCConfig, potential_outcomes: bool) -> Result<Vec<MCSummary>, Error> {
    let target = match (&cfg.scenario, &cfg.method.mc.times) {
        (Scenario::Hr(_), Some(times)) => McTarget::Hr { times: times.clone() },
        (s, _) => McTarget::default_for(s),
    };
    let mut all = mc_integration(&cfg.scenario, &target, mc)?;
    if potential_outcomes || cfg.method.mc.potential_outcomes {
        match &cfg.scenario {
            Scenario::Confounding(s) => all.extend(potential_outcome_odds_ratio(s, mc)?),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "potential-outcome simulation needs a confounding scenario, not {}",
                    other.kind()
                )))
            }
        }
    }
    Ok(all)
}

fn cmd_mc(a: &McArgs, with_truth: bool) -> CliResult<()> {
    let cfg = load(&a.config)?;
    let mc = mc_config(a, &cfg)?;
    let summaries = run_mc(&cfg, &mc, a.potential_outcomes)?;
    let reps = csv(REP_CSV_HEADER, summaries.iter().flat_map(|s| s.rep_rows(&cfg.id)));
    let summary = csv(SUMMARY_CSV_HEADER, summaries.iter().map(|s| s.summary_row(&cfg.id)));
    let dir = out_dir(a.out.as_ref(), &cfg);
    if let Some(dir) = &dir {
        write_atomic(&dir.join(format!("{}_mc_reps.csv", cfg.id)), &reps)?;
        write_atomic(&dir.join(format!("{}_mc_summary.csv", cfg.id)), &summary)?;
    }
    if !with_truth {
        print!("{summary}");
        return Ok(());
    }
    let mut truths = vec![quadrature_truth(&cfg, a.level, a.decomposition)?];
    truths.extend(closed_form(&cfg)?);
    let mut rows = Vec::new();
    for t in &truths {
        for s in &summaries {
            match compare(t, s) {
                Ok(c) => rows.push(c.csv_row(&cfg.id, mc.n_reps)),
                // closed forms cover only some estimands
                Err(Error::EstimandMismatch(_)) if t.method == crate::scenarios::Method::ClosedForm => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let table = csv(COMPARISON_CSV_HEADER, rows);
    if let Some(dir) = &dir {
        let truth_rows = truths.iter().flat_map(|t| t.csv_rows());
        write_atomic(&dir.join(format!("{}_truth.csv", cfg.id)), &csv(TRUTH_CSV_HEADER, truth_rows))?;
        write_atomic(&dir.join(format!("{}_comparison.csv", cfg.id)), &table)?;
    }
    print!("{table}");
    Ok(())
}

fn sweep_spec(a: &BenchArgs) -> CliResult<SweepSpec> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            if let (Some(seed), Some(obj)) = (a.seed, v.as_object_mut()) {
                obj.insert("seed".into(), seed.into());
            }
            serde_path_to_error::deserialize::<_, SweepSpec>(v)
                .map_err(|e| CliError::Validation(format!("{}: at `{}`: {}", p.display(), e.path(), e.inner())))?
        }
        None => SweepSpec::new(a.seed.ok_or_else(|| {
            CliError::Validation("a seed is required: pass --seed or set it in --spec".into())
        })?),
    };
    if let Some(s) = &a.scenario {
        spec.scenario = s.clone();
    }
    if let Some(v) = &a.levels {
        spec.levels = v.0.clone();
    }
    if let Some(v) = &a.dims {
        spec.dims = v.0.clone();
    }
    if let Some(v) = a.dim_level {
        spec.dim_level = v;
    }
    if let Some(v) = &a.mc_samples {
        spec.mc_samples = v.0.clone();
    }
    if let Some(v) = a.mc_reps {
        spec.mc_reps = v;
    }
    if let Some(v) = a.timing_reps {
        spec.timing_reps = v;
    }
    if let Some(v) = a.mc_timing_reps {
        spec.mc_timing_reps = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let spec = sweep_spec(a)?;
    if let Some(&k) = spec.levels.last() {
        warn_level(k);
    }
    if a.only != Some(SweepKind::Dimension) {
        let rows = convergence_sweep(&spec)?;
        write_atomic(
            &a.out.join("convergence.csv"),
            &csv(CONVERGENCE_CSV_HEADER, rows.iter().map(|r| r.csv_row())),
        )?;
    }
    if a.only != Some(SweepKind::Convergence) {
        let rows = dimension_sweep(&spec)?;
        write_atomic(
            &a.out.join("dimension.csv"),
            &csv(DIMENSION_CSV_HEADER, rows.iter().map(|r| r.csv_row())),
        )?;
    }
    Ok(())
}
