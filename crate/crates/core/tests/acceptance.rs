//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing output capture) before asserting.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fomg::analysis::{run_smoothing_experiment, SmoothingMethod};
use fomg::harness::{run_table, run_truncation_comparison, ExperimentConfig, RowDetail, BASELINE_TAG};
use fomg::multigrid::{reference_solution, solve, MultigridSolver, SmootherKind, VCycleConfig, Variant};
use fomg::problems::{BoundSet, Family, Problem, SurfaceForm};
use fomg::smoothers::{line_search_projected, line_search_unconstrained, project_box, project_box_hyperplane};
use fomg::sparse::CsrMatrix;
use fomg::{build_hierarchy, Objective, Quadratic};

fn verdict(name: &str, pass: bool, detail: String) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[test]
fn transfer_adjointness() {
    let hier = build_hierarchy(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 1..=6 {
        let (nc, nf) = (hier.level(k - 1).n, hier.level(k).n);
        for _ in 0..200 {
            // positive entries keep both sides away from cancellation
            let v = uniform_vec(&mut rng, nc);
            let w = uniform_vec(&mut rng, nf);
            let lhs = dot(&hier.prolongate(k, &v).unwrap(), &w);
            let rhs = 4.0 * dot(&v, &hier.restrict(k, &w).unwrap());
            worst = worst.max((lhs - rhs).abs() / lhs.abs());
        }
    }
    verdict("transfer adjointness", worst <= 1e-13, format!("largest relative gap {worst:.2e} over 1200 pairs"));
}

/// Random point inside the bounds of the finest level.
fn feasible_point(rng: &mut ChaCha8Rng, bounds: &BoundSet) -> Vec<f64> {
    (0..bounds.len())
        .map(|i| {
            let (l, u) = (bounds.lower[i], bounds.upper[i]);
            let base = if l.is_finite() { l } else { u.min(0.0) - 1.0 };
            let room = if u.is_finite() { u - base } else { 1.0 };
            (base + room * rng.random::<f64>()).min(u)
        })
        .collect()
}

#[test]
fn finite_difference_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for family in Family::ALL {
        for level in 2..=4 {
            let p = Problem::build(family, level).unwrap();
            let data = p.level(level);
            let f = &data.objective;
            for _ in 0..20 {
                let x = feasible_point(&mut rng, &data.bounds);
                let g = f.gradient(&x);
                let mut fd = vec![0.0; x.len()];
                let mut y = x.clone();
                for i in 0..x.len() {
                    let delta = 1e-5 * x[i].abs().max(1.0);
                    y[i] = x[i] + delta;
                    let up = f.value(&y);
                    y[i] = x[i] - delta;
                    let down = f.value(&y);
                    y[i] = x[i];
                    fd[i] = (up - down) / (2.0 * delta);
                }
                let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                let rel = norm(&diff) / norm(&g).max(1e-300);
                if rel > worst {
                    worst = rel;
                    worst_at = format!("{family} level {level}");
                }
            }
        }
    }
    verdict(
        "finite-difference gradients",
        worst <= 1e-6,
        format!("largest relative gap {worst:.2e} ({worst_at}), 20 points per family and level"),
    );
}

fn random_convex_quadratic(rng: &mut ChaCha8Rng, n: usize) -> Quadratic {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut v: f64 = (0..n).map(|r| a[r][i] * a[r][j]).sum();
            if i == j {
                v += 0.05;
            }
            triplets.push((i, j, v));
        }
    }
    let b = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Quadratic::new(CsrMatrix::from_triplets(n, n, &triplets), b)
}

fn random_bounds(rng: &mut ChaCha8Rng, n: usize) -> BoundSet {
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let l: f64 = rng.random_range(-1.5..0.5);
        let u = l + rng.random_range(0.1..2.0);
        lower.push(if rng.random::<f64>() < 0.2 { f64::NEG_INFINITY } else { l });
        upper.push(if rng.random::<f64>() < 0.2 { f64::INFINITY } else { u });
    }
    BoundSet { lower, upper }
}

#[test]
fn line_search_decrease_and_bracket() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut bad) = (0usize, Vec::new());
    for case in 0..500 {
        let n = rng.random_range(1..=20);
        let q = random_convex_quadratic(&mut rng, n);
        let bounds = random_bounds(&mut rng, n);
        let s0 = 10f64.powf(rng.random_range(-3.0..1.0));
        let growth = 2.0;

        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = q.gradient(&x);
        if norm(&g) > 0.0 {
            let r = line_search_unconstrained(&q, &x, &g, s0, growth).unwrap();
            checked += 1;
            let ok = !r.capped && q.value(&r.point) < q.value(&x) && r.slope < 0.0 && r.slope_beyond.is_some_and(|b| b >= 0.0);
            if !ok {
                bad.push(format!("unconstrained case {case}"));
            }
        }

        let x = project_box(&x, &bounds);
        let g = q.gradient(&x);
        let r = line_search_projected(&q, &x, &g, &bounds, s0, growth).unwrap();
        if !r.capped {
            checked += 1;
            let ok = q.value(&r.point) < q.value(&x) && r.slope < 0.0 && r.slope_beyond.is_some_and(|b| b >= 0.0);
            if !ok {
                bad.push(format!("projected case {case}"));
            }
        }
    }
    verdict(
        "line-search decrease and bracket",
        bad.is_empty() && checked > 800,
        format!("{checked} accepted steps checked, {} violations {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()),
    );
}

/// Exhaustive search over lower/upper/free assignments.
fn brute_projection(x: &[f64], bounds: &BoundSet, target: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut tags = Vec::with_capacity(n);
        for _ in 0..n {
            tags.push(c % 3);
            c /= 3;
        }
        let fixed: f64 = (0..n)
            .map(|i| match tags[i] {
                0 => bounds.lower[i],
                1 => bounds.upper[i],
                _ => 0.0,
            })
            .sum();
        let free: Vec<usize> = (0..n).filter(|&i| tags[i] == 2).collect();
        let y: Vec<f64> = if free.is_empty() {
            if (fixed - target).abs() > 1e-12 {
                continue;
            }
            (0..n).map(|i| if tags[i] == 0 { bounds.lower[i] } else { bounds.upper[i] }).collect()
        } else {
            let lambda = (free.iter().map(|&i| x[i]).sum::<f64>() + fixed - target) / free.len() as f64;
            (0..n)
                .map(|i| match tags[i] {
                    0 => bounds.lower[i],
                    1 => bounds.upper[i],
                    _ => x[i] - lambda,
                })
                .collect()
        };
        if y.iter().any(|v| !v.is_finite()) || !bounds.contains(&y) {
            continue;
        }
        let d: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, y));
        }
    }
    best.map(|(_, y)| y)
}

#[test]
fn hyperplane_projection_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.1..3.0)).collect();
        let (lo_sum, up_sum): (f64, f64) = (lower.iter().sum(), upper.iter().sum());
        let target = lo_sum + (up_sum - lo_sum) * rng.random::<f64>();
        let bounds = BoundSet { lower, upper };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let fast = project_box_hyperplane(&x, &bounds, target).unwrap();
        let slow = brute_projection(&x, &bounds, target).expect("feasible instance");
        let gap = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    verdict("hyperplane projection", worst <= 1e-9, format!("largest deviation {worst:.2e} over 500 instances"));
}

fn table(problem: Family, levels: &[usize], nu: &[usize], smoother: SmootherKind, baseline: bool) -> Vec<(usize, String, RowDetail)> {
    table_with(ExperimentConfig {
        problem,
        levels: levels.to_vec(),
        nu: nu.to_vec(),
        smoother,
        baseline,
        timing: false,
        ..ExperimentConfig::default()
    })
}

fn table_with(cfg: ExperimentConfig) -> Vec<(usize, String, RowDetail)> {
    run_table(&cfg)
        .unwrap()
        .outcomes
        .into_iter()
        .map(|o| (o.level, o.smoother, o.result.expect("row ran")))
        .collect()
}

/// Checks `(level, tag) → expected` within `tol`; returns (all ok, summary).
fn compare(rows: &[(usize, String, RowDetail)], expected: &[(usize, &str, f64)], tol: f64) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(level, tag, want) in expected {
        let got = rows
            .iter()
            .find(|(l, t, _)| *l == level && t == tag)
            .and_then(|(_, _, d)| d.row.rate);
        let pass = got.is_some_and(|g| (g - want).abs() <= tol);
        ok &= pass;
        parts.push(format!("{tag}@{level} {} (want {want})", got.map_or("none".into(), |g| format!("{g:.3}"))));
    }
    (ok, parts.join(", "))
}

#[test]
fn spiral_rates_and_work() {
    let gp = table(Family::Spiral, &[4, 5], &[2, 5], SmootherKind::Gp, true);
    let gsp = table(Family::Spiral, &[4, 5], &[1], SmootherKind::Gsp, false);
    let mut rows = gp.clone();
    rows.extend(gsp);
    let (rates_ok, summary) = compare(
        &rows,
        &[(4, "GSP", 0.07), (5, "GSP", 0.14), (4, "GP-2", 0.07), (5, "GP-2", 0.14), (4, "GP-5", 0.01), (5, "GP-5", 0.03)],
        0.10,
    );
    let top = |tag: &str| gp.iter().find(|(l, t, _)| *l == 5 && t == tag).map(|(_, _, d)| d.row.feval_top).unwrap();
    let (mg, base) = (top("GP-2"), top(BASELINE_TAG));
    let ratio = mg as f64 / base as f64;
    verdict(
        "spiral rates and work",
        rates_ok && ratio <= 0.25,
        format!("{summary}; level 5 finest evaluations {mg} vs {base} single-level ({:.1}%)", 100.0 * ratio),
    );
}

#[test]
fn nonquadratic_rates() {
    let rows = table(Family::Nonquadratic, &[4, 5], &[1, 3], SmootherKind::Gp, false);
    let (ok, summary) = compare(&rows, &[(4, "GP-1", 0.17), (5, "GP-1", 0.27), (4, "GP-3", 0.05), (5, "GP-3", 0.08)], 0.10);
    verdict("nonquadratic rates", ok, summary);
}

#[test]
fn minimal_surface_rates() {
    let expected = [(2, "GP-1", 0.118), (3, "GP-1", 0.115)];
    let rows = table(Family::MinimalSurface, &[2, 3], &[1], SmootherKind::Gp, false);
    let (ok, summary) = compare(&rows, &expected, 0.10);
    // informational: the mesh-scaled element form
    let unscaled = table_with(ExperimentConfig {
        problem: Family::MinimalSurface,
        levels: vec![2, 3],
        baseline: false,
        timing: false,
        surface: SurfaceForm::Unscaled,
        ..ExperimentConfig::default()
    });
    let (_, alt) = compare(&unscaled, &expected, 0.10);
    verdict("minimal surface rates", ok, format!("{summary}; with surface=unscaled: {alt}"));
}

#[test]
fn equality_rate_residual_and_feasibility() {
    let p = Problem::build(Family::Equality, 4).unwrap();
    let r = reference_solution(&p, 1e-11).unwrap();
    let report = solve(&p, &VCycleConfig::gp(Variant::FasPlain, 1), Some(&r.x)).unwrap();
    let rate = report.rate.as_ref().map_or(f64::NAN, |e| e.rate);
    let worst = report.equality_residuals.iter().cloned().fold(0.0, f64::max);
    let ok = (rate - 0.32).abs() <= 0.15 && worst <= 1e-10 && report.feasible && report.converged;
    verdict(
        "equality rate, residual and feasibility",
        ok,
        format!(
            "rate {rate:.3} (want 0.32), largest equality residual {worst:.1e} over {} cycles, feasible {}",
            report.cycles, report.feasible
        ),
    );
}

#[test]
fn solution_is_a_fixed_point() {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for family in Family::ALL {
        let p = Problem::build(family, 3).unwrap();
        let r = reference_solution(&p, 1e-11).unwrap();
        assert!(r.residual <= 1e-11, "{family}: reference residual {}", r.residual);
        for variant in Variant::ALL {
            for smoother in [SmootherKind::Gp, SmootherKind::Gsp] {
                let cfg = VCycleConfig {
                    smoother,
                    ..VCycleConfig::gp(variant, 1)
                };
                let Ok(mut solver) = MultigridSolver::new(&p, cfg) else {
                    continue;
                };
                let next = solver.cycle(&r.x).unwrap();
                let moved = norm(&next.iter().zip(&r.x).map(|(a, b)| a - b).collect::<Vec<_>>());
                worst = worst.max(moved);
                runs += 1;
            }
        }
    }
    verdict("fixed point", worst <= 1e-7, format!("largest move {worst:.2e} over {runs} valid pairs"));
}

#[test]
fn smoothing_split() {
    let sd = run_smoothing_experiment(3, SmoothingMethod::SdInexact, 0).unwrap();
    let gs = run_smoothing_experiment(2, SmoothingMethod::GaussSeidel, 0).unwrap();
    let (low, high) = sd.ratios(3);
    let gs_iters = (1..=2).find(|&i| gs.ratios(i).1 <= 0.1);
    let ok = high <= 0.1 && low >= 0.3 && gs_iters.is_some();
    verdict(
        "smoothing split",
        ok,
        format!(
            "inexact steepest descent after 3: high {high:.3} (want <= 0.1), low {low:.3} (want >= 0.3); Gauss-Seidel high <= 0.1 after {:?}",
            gs_iters
        ),
    );
}

#[test]
fn truncation_trade_off() {
    let cfg = ExperimentConfig {
        problem: Family::Spiral,
        levels: vec![6],
        nu: vec![5],
        ..ExperimentConfig::default()
    };
    let cmp = run_truncation_comparison(&cfg).unwrap();
    let rate = |e: &[f64]| fomg::analysis::asymptotic_rate(&e[1..]).unwrap().rate;
    let (rt, rp) = (rate(&cmp.truncated.errors), rate(&cmp.plain.errors));
    let (et, ep) = (cmp.truncated.errors[3], cmp.plain.errors[3]);
    verdict(
        "truncation trade-off",
        rt < rp && ep < et,
        format!("rates truncated {rt:.3} vs plain {rp:.3}; errors after 3 cycles truncated {et:.2e} vs plain {ep:.2e}"),
    );
}
