//! Experiment driver: configuration, convergence tables and curves, and the
//! files written for them.
//!
//! A configuration is a flat `key = value` text (see
//! [`ExperimentConfig::set`] for the keys); command-line overrides are
//! applied on top with the same keys.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{run_smoothing_experiment, SmoothingMethod, SmoothingTrace};
use crate::error::{Error, Result};
use crate::multigrid::{reference_solution, solve, Reference, SmootherKind, VCycleConfig, Variant};
use crate::objective::{distance, norm, Counted, EvalCounts};
use crate::problems::{Family, Problem, ProblemOptions, SurfaceForm};
use crate::smoothers::{armijo_pg_solve_monitored, gp_solve_monitored, SmootherConfig, StepState};

/// Largest level the harness accepts.
pub const MAX_LEVEL: usize = 12;

/// Iteration cap of the single-level baseline.
pub const BASELINE_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Family,
    pub levels: Vec<usize>,
    /// `None` picks [`default_variant`] of the problem.
    pub variant: Option<Variant>,
    /// Smoothing steps per side.
    pub nu: Vec<usize>,
    pub smoother: SmootherKind,
    pub seed: u64,
    pub out: PathBuf,
    /// Stationarity tolerance of the reference solution.
    pub reference_tolerance: f64,
    /// Relative error at which a run counts as converged.
    pub error_tolerance: f64,
    /// Cap on V-cycles per run.
    pub niter: usize,
    /// Add the single-level gradient projection row per level.
    pub baseline: bool,
    /// Write measured wall time; when off the column holds zeros and
    /// output files are byte-for-byte reproducible.
    pub timing: bool,
    /// Iterations of the smoothing experiment.
    pub smoothing_iters: usize,
    /// Element term of the minimal surface problem.
    pub surface: SurfaceForm,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Family::Spiral,
            levels: vec![4, 5],
            variant: None,
            nu: vec![1],
            smoother: SmootherKind::Gp,
            seed: 0,
            out: PathBuf::from("out"),
            reference_tolerance: 1e-11,
            error_tolerance: 1e-8,
            niter: 100,
            baseline: true,
            timing: true,
            smoothing_iters: 10,
            surface: SurfaceForm::Area,
        }
    }
}

/// Algorithm used for a problem unless the configuration names one.
pub fn default_variant(family: Family) -> Variant {
    match family {
        Family::Spiral => Variant::CsTruncated,
        Family::Nonquadratic | Family::MinimalSurface => Variant::FasTruncated,
        Family::Equality => Variant::FasPlain,
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses `a..b` (inclusive), `a..=b`, a comma list, or a single number.
pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("`{t}` is not a non-negative integer")))
    };
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(config_err(format!("empty range `{s}`")));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(num).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: expected a boolean, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(format!("{key}: cannot parse `{v}`")))
}

impl ExperimentConfig {
    /// Applies one setting. Keys: `problem`, `levels`, `variant` (`auto`
    /// resets to the default), `nu`, `smoother`, `seed`, `out`,
    /// `ref_tol`, `tol`, `niter`, `baseline`, `timing`, `smoothing_iters`,
    /// `surface`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "problem" => self.problem = v.parse()?,
            "levels" | "level" => self.levels = parse_list(v)?,
            "variant" => self.variant = if v == "auto" { None } else { Some(v.parse()?) },
            "nu" => self.nu = parse_list(v)?,
            "smoother" => self.smoother = v.parse()?,
            "seed" => self.seed = parse_num("seed", v)?,
            "out" => self.out = PathBuf::from(v),
            "ref_tol" | "reference_tolerance" => self.reference_tolerance = parse_num(key, v)?,
            "tol" | "error_tolerance" => self.error_tolerance = parse_num(key, v)?,
            "niter" => self.niter = parse_num("niter", v)?,
            "baseline" => self.baseline = parse_bool(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            "smoothing_iters" => self.smoothing_iters = parse_num(key, v)?,
            "surface" => self.surface = v.parse()?,
            other => return Err(config_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", no + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&l) = self.levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(config_err(format!("level {l} exceeds {MAX_LEVEL}")));
        }
        if self.nu.contains(&0) {
            return Err(config_err("nu must be at least 1"));
        }
        if !(self.reference_tolerance > 0.0) || !(self.error_tolerance > 0.0) {
            return Err(config_err("tolerances must be positive"));
        }
        Ok(())
    }

    /// Builds the configured problem with `level` as its finest level.
    pub fn build_problem(&self, level: usize) -> Result<Problem> {
        let options = ProblemOptions {
            surface_form: self.surface,
            ..ProblemOptions::default()
        };
        Problem::build_with(self.problem, level, options)
    }

    pub fn resolved_variant(&self) -> Variant {
        self.variant.unwrap_or_else(|| default_variant(self.problem))
    }

    /// V-cycle settings of one table row.
    pub fn vcycle(&self, nu: usize) -> VCycleConfig {
        VCycleConfig {
            smoother: self.smoother,
            max_cycles: self.niter,
            error_tolerance: self.error_tolerance,
            ..VCycleConfig::gp(self.resolved_variant(), nu)
        }
    }

    fn tag(&self, nu: usize) -> String {
        match (self.smoother, nu) {
            (SmootherKind::Gsp, 1) => "GSP".to_string(),
            (SmootherKind::Gsp, nu) => format!("GSP-{nu}"),
            (SmootherKind::Gp, nu) => format!("GP-{nu}"),
        }
    }
}

/// Smoother column of the baseline rows.
pub const BASELINE_TAG: &str = "GP-only";

/// One line of `table_<problem>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub level: usize,
    pub nvars: usize,
    pub smoother: String,
    /// Empty for the baseline and for runs with fewer than three errors.
    pub rate: Option<f64>,
    pub feval_top: u64,
    pub feval_all_levels: u64,
    pub seconds: f64,
}

/// A row together with what the CSV leaves out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDetail {
    pub row: ResultRow,
    pub variant: Option<Variant>,
    /// V-cycles, or smoother iterations for the baseline.
    pub iterations: usize,
    pub converged: bool,
    /// Function plus gradient calls per level, coarsest first.
    pub per_level: Vec<u64>,
    /// `‖x_t - x*‖`, `t = 0..=iterations` (empty for the baseline).
    pub errors: Vec<f64>,
    pub reference_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub level: usize,
    pub smoother: String,
    pub result: std::result::Result<RowDetail, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRun {
    pub problem: Family,
    pub outcomes: Vec<RowOutcome>,
}

impl TableRun {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|d| d.row.clone()))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

/// Number of unknowns on level `k`.
pub fn nvars(level: usize) -> usize {
    let m = (1usize << (level + 1)) - 1;
    m * m
}

/// A level's problem and reference, or why they could not be built.
type Prepared = std::result::Result<(Problem, Reference), String>;

enum Job {
    Cycle(usize),
    Baseline,
}

/// Runs every `(level, ν)` row plus the baseline rows, in parallel. Rows come
/// back in configuration order; failures are recorded per row.
pub fn run_table(cfg: &ExperimentConfig) -> Result<TableRun> {
    cfg.validate()?;
    let prepared: Vec<(usize, Prepared)> = cfg
        .levels
        .par_iter()
        .map(|&level| {
            let built = cfg.build_problem(level)
                .and_then(|p| reference_solution(&p, cfg.reference_tolerance).map(|r| (p, r)))
                .map_err(|e| e.to_string());
            (level, built)
        })
        .collect();

    let mut jobs = Vec::new();
    for (i, _) in prepared.iter().enumerate() {
        jobs.extend(cfg.nu.iter().map(|&nu| (i, Job::Cycle(nu))));
        if cfg.baseline {
            jobs.push((i, Job::Baseline));
        }
    }
    let outcomes = jobs
        .par_iter()
        .map(|(i, job)| {
            let (level, built) = &prepared[*i];
            let smoother = match job {
                Job::Cycle(nu) => cfg.tag(*nu),
                Job::Baseline => BASELINE_TAG.to_string(),
            };
            let result = match built {
                Err(e) => Err(e.clone()),
                Ok((p, r)) => match job {
                    Job::Cycle(nu) => cycle_row(cfg, p, r, *nu, smoother.clone()),
                    Job::Baseline => baseline_row(cfg, p, r),
                }
                .map_err(|e| e.to_string()),
            };
            RowOutcome {
                level: *level,
                smoother,
                result,
            }
        })
        .collect();
    Ok(TableRun {
        problem: cfg.problem,
        outcomes,
    })
}

fn cycle_row(cfg: &ExperimentConfig, p: &Problem, r: &Reference, nu: usize, tag: String) -> Result<RowDetail> {
    let start = Instant::now();
    let report = solve(p, &cfg.vcycle(nu), Some(&r.x))?;
    let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let level = p.finest();
    Ok(RowDetail {
        row: ResultRow {
            level,
            nvars: nvars(level),
            smoother: tag,
            rate: report.rate.as_ref().map(|e| e.rate),
            feval_top: report.finest_evals(),
            feval_all_levels: report.total_evals(),
            seconds,
        },
        variant: Some(cfg.resolved_variant()),
        iterations: report.cycles,
        converged: report.converged,
        per_level: report.evals.iter().map(|e| e.total()).collect(),
        errors: report.errors,
        reference_residual: r.residual,
    })
}

/// Gradient projection (Armijo projected gradient under the equality
/// constraint) on the finest level alone, from zero, until the same error
/// tolerance as the multigrid rows.
fn baseline_row(cfg: &ExperimentConfig, p: &Problem, r: &Reference) -> Result<RowDetail> {
    let start = Instant::now();
    let level = p.finest();
    let data = p.level(level);
    let counts = EvalCounts::new(1);
    let f = Counted::new(&data.objective, counts.level(0));
    let x0 = vec![0.0; r.x.len()];
    let limit = cfg.error_tolerance * norm(&r.x);
    let mut converged = false;
    let stop = |_: usize, x: &[f64]| {
        converged = distance(x, &r.x) <= limit;
        converged
    };
    let smoother = SmootherConfig::new(0.0, BASELINE_MAX_ITER);
    let mut state = StepState::new(1.0);
    let report = match data.equality {
        Some(gamma) => armijo_pg_solve_monitored(&f, &data.bounds, gamma, &x0, &smoother, &mut state, stop)?,
        None => gp_solve_monitored(&f, &data.bounds, &x0, &smoother, &mut state, stop)?,
    };
    let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let total = counts.level(0).total();
    Ok(RowDetail {
        row: ResultRow {
            level,
            nvars: nvars(level),
            smoother: BASELINE_TAG.to_string(),
            rate: None,
            feval_top: total,
            feval_all_levels: total,
            seconds,
        },
        variant: None,
        iterations: report.iterations,
        converged,
        per_level: vec![total],
        errors: Vec::new(),
        reference_residual: r.residual,
    })
}

/// Error history of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub tag: String,
    /// `‖x_t - x*‖` for `t = 0..=iterations`.
    pub errors: Vec<f64>,
}

impl Curve {
    pub fn iterations(&self) -> usize {
        self.errors.len().saturating_sub(1)
    }

    /// `iter log10_err` lines.
    pub fn to_dat(&self) -> String {
        let mut s = String::new();
        for (t, e) in self.errors.iter().enumerate() {
            let _ = writeln!(s, "{t} {}", e.log10());
        }
        s
    }
}

fn curve_tag(cfg: &ExperimentConfig, variant: Variant, level: usize, nu: usize) -> String {
    format!("{}_l{level}_{variant}_{}", cfg.problem, cfg.tag(nu).to_lowercase())
}

/// One convergence curve per `(level, ν)`.
pub fn run_curves(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    cfg.validate()?;
    let variant = cfg.resolved_variant();
    let mut out = Vec::new();
    for &level in &cfg.levels {
        let p = cfg.build_problem(level)?;
        let r = reference_solution(&p, cfg.reference_tolerance)?;
        for &nu in &cfg.nu {
            let report = solve(&p, &cfg.vcycle(nu), Some(&r.x))?;
            out.push(Curve {
                tag: curve_tag(cfg, variant, level, nu),
                errors: report.errors,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub level: usize,
    pub nu: usize,
    pub truncated: Curve,
    pub plain: Curve,
}

/// Truncated and untruncated full approximation cycles on the spiral
/// problem from the same start, at the last configured level and first `ν`.
pub fn run_truncation_comparison(cfg: &ExperimentConfig) -> Result<TruncationComparison> {
    cfg.validate()?;
    if cfg.problem != Family::Spiral {
        return Err(config_err("the truncation comparison runs on the spiral problem"));
    }
    let level = *cfg.levels.last().ok_or_else(|| config_err("no level given"))?;
    let nu = *cfg.nu.first().ok_or_else(|| config_err("no nu given"))?;
    let p = cfg.build_problem(level)?;
    let r = reference_solution(&p, cfg.reference_tolerance)?;
    let run = |variant: Variant| -> Result<Curve> {
        let vc = VCycleConfig {
            variant,
            smoother: SmootherKind::Gp,
            ..cfg.vcycle(nu)
        };
        let report = solve(&p, &vc, Some(&r.x))?;
        Ok(Curve {
            tag: format!("spiral_l{level}_{variant}_gp-{nu}"),
            errors: report.errors,
        })
    };
    Ok(TruncationComparison {
        level,
        nu,
        truncated: run(Variant::FasTruncated)?,
        plain: run(Variant::FasPlain)?,
    })
}

/// Traces of all three smoothing methods for the configured seed.
pub fn run_smoothing(cfg: &ExperimentConfig) -> Result<Vec<SmoothingTrace>> {
    [SmoothingMethod::SdExact, SmoothingMethod::SdInexact, SmoothingMethod::GaussSeidel]
        .into_iter()
        .map(|m| run_smoothing_experiment(cfg.smoothing_iters, m, cfg.seed))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn table_path(dir: &Path, problem: Family) -> PathBuf {
    dir.join(format!("table_{problem}.csv"))
}

pub fn write_table(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(["level", "nvars", "smoother", "rate", "feval_top", "feval_all_levels", "seconds"])
        .map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_table(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn write_curve(dir: &Path, curve: &Curve) -> Result<PathBuf> {
    let path = dir.join(format!("curve_{}.dat", curve.tag));
    fs::write(&path, curve.to_dat()).map_err(io_err(&path))?;
    Ok(path)
}

/// Resolved configuration and per-row details of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub variant: Variant,
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub rows: Vec<RowOutcome>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Io {
        path: path.clone(),
        source: e.into(),
    })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

/// Writes the table (when given), the curves and `run.json` into `dir`,
/// creating it if needed. Returns the written paths, manifest last.
pub fn emit_outputs(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    table: Option<&TableRun>,
    curves: &[Curve],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    if let Some(t) = table {
        let path = table_path(dir, t.problem);
        write_table(&path, &t.rows())?;
        files.push(path);
    }
    for c in curves {
        files.push(write_curve(dir, c)?);
    }
    let manifest = Manifest {
        command: command.to_string(),
        config: cfg.clone(),
        variant: cfg.resolved_variant(),
        files: files
            .iter()
            .map(|f| f.strip_prefix(dir).unwrap_or(f).to_path_buf())
            .collect(),
        rows: table.map(|t| t.outcomes.clone()).unwrap_or_default(),
    };
    files.push(write_manifest(dir, &manifest)?);
    Ok(files)
}

/// `iter,method,low,high` lines of smoothing traces.
pub fn smoothing_csv(traces: &[SmoothingTrace]) -> String {
    let mut s = String::from("iter,method,low,high\n");
    for t in traces {
        for (i, split) in t.splits.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", t.method.name(), split.low, split.high);
        }
    }
    s
}
