use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fomg::harness::{
    emit_outputs, run_curves, run_smoothing, run_table, run_truncation_comparison, smoothing_csv, Curve,
    ExperimentConfig,
};
use fomg::multigrid::{reference_solution, solve};
use fomg::Error;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "fomg", version, about = "Multigrid experiments for bound-constrained problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate and evaluation table over levels and smoothing steps.
    Table(Settings),
    /// Convergence curves; `--truncation` compares truncated and plain cycles.
    Curves {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        truncation: bool,
    },
    /// Error splits of the smoothing experiment.
    Smoothing(Settings),
    /// One run at the first configured level and smoothing count.
    Solve(Settings),
}

#[derive(Args)]
struct Settings {
    /// `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// e.g. `4..8`, `4,6` or `5`
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    niter: Option<String>,
    /// Any further `key=value` setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Settings {
    fn resolve(&self) -> fomg::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("levels", &self.levels),
            ("nu", &self.nu),
            ("variant", &self.variant),
            ("smoother", &self.smoother),
            ("seed", &self.seed),
            ("out", &self.out),
            ("niter", &self.niter),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for pair in &self.extra {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Rows(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io { .. } | Error::Csv { .. } => Failure::Config(e.to_string()),
            other => Failure::Rows(other.to_string()),
        }
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        out!("wrote {}", f.display());
    }
}

fn table(s: &Settings) -> Result<(), Failure> {
    let cfg = s.resolve()?;
    let run = run_table(&cfg)?;
    for o in &run.outcomes {
        match &o.result {
            Ok(d) => out!(
                "level {} {:>8} rate {:>8} feval_top {:>7} all {:>7}",
                o.level,
                o.smoother,
                d.row.rate.map_or("-".to_string(), |r| format!("{r:.3}")),
                d.row.feval_top,
                d.row.feval_all_levels
            ),
            Err(e) => eprintln!("level {} {}: {e}", o.level, o.smoother),
        }
    }
    print_files(&emit_outputs(&cfg.out, "table", &cfg, Some(&run), &[])?);
    match run.failures() {
        0 => Ok(()),
        n => Err(Failure::Rows(format!("{n} row(s) failed"))),
    }
}

fn curves(s: &Settings, truncation: bool) -> Result<(), Failure> {
    let cfg = s.resolve()?;
    let curves: Vec<Curve> = if truncation {
        let cmp = run_truncation_comparison(&cfg)?;
        vec![cmp.truncated, cmp.plain]
    } else {
        run_curves(&cfg)?
    };
    for c in &curves {
        out!("{}: {} iterations", c.tag, c.iterations());
    }
    print_files(&emit_outputs(&cfg.out, "curves", &cfg, None, &curves)?);
    Ok(())
}

fn smoothing(s: &Settings) -> Result<(), Failure> {
    let cfg = s.resolve()?;
    let traces = run_smoothing(&cfg)?;
    for t in &traces {
        let last = t.splits.len() - 1;
        let (low, high) = t.ratios(last);
        out!("{:>12}: after {last} iterations low {low:.3} high {high:.3}", t.method.name());
    }
    let mut files = emit_outputs(&cfg.out, "smoothing", &cfg, None, &[])?;
    let path = cfg.out.join("smoothing.csv");
    std::fs::write(&path, smoothing_csv(&traces)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    files.push(path);
    print_files(&files);
    Ok(())
}

fn single(s: &Settings) -> Result<(), Failure> {
    let cfg = s.resolve()?;
    let level = *cfg.levels.first().ok_or_else(|| Failure::Config("no level given".into()))?;
    let nu = *cfg.nu.first().ok_or_else(|| Failure::Config("no nu given".into()))?;
    let p = cfg.build_problem(level)?;
    let r = reference_solution(&p, cfg.reference_tolerance)?;
    let report = solve(&p, &cfg.vcycle(nu), Some(&r.x))?;
    out!("problem {} level {level} variant {} nu {nu}", cfg.problem, cfg.resolved_variant());
    out!("reference residual {:.2e} after {} cycles", r.residual, r.cycles);
    out!("cycles {} converged {}", report.cycles, report.converged);
    if let Some(rate) = &report.rate {
        out!("rate {:.4} (whole-history {:.4})", rate.rate, rate.formula);
    }
    out!("evaluations finest {} all levels {}", report.finest_evals(), report.total_evals());
    out!("feasible {}", report.feasible);
    if let Some(worst) = report.equality_residuals.iter().cloned().reduce(f64::max) {
        out!("largest equality residual {worst:.2e}");
    }
    let curve = Curve {
        tag: format!("{}_l{level}_{}_single", cfg.problem, cfg.resolved_variant()),
        errors: report.errors,
    };
    print_files(&emit_outputs(&cfg.out, "solve", &cfg, None, &[curve])?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Table(s) => table(s),
        Command::Curves { settings, truncation } => curves(settings, *truncation),
        Command::Smoothing(s) => smoothing(s),
        Command::Solve(s) => single(s),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Rows(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
