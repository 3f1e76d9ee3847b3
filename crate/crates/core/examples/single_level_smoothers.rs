//! Gradient projection and projected Gauss-Seidel on one level.

use fomg::objective::EvalCounts;
use fomg::problems::{Family, Problem};
use fomg::smoothers::{gp_solve, kkt_residual, pgs_solve, SmootherConfig, StepState};
use fomg::Counted;

fn main() -> fomg::Result<()> {
    let level = 3;
    let p = Problem::build(Family::Spiral, level)?;
    let data = p.level(level);
    let x0 = vec![0.0; data.bounds.len()];
    let counts = EvalCounts::new(1);
    let f = Counted::new(&data.objective, counts.level(0));

    let mut gp = Vec::new();
    for budget in [10, 100, 1000] {
        let r = gp_solve(&f, &data.bounds, &x0, &SmootherConfig::new(1e-9, budget), &mut StepState::new(1.0))?;
        println!("gradient projection, budget {budget:>4}: {} steps, residual {:.2e}", r.iterations, r.residual);
        gp = r.x;
    }
    println!("evaluations so far: {}", counts.total());

    let q = data.objective.stiffness().expect("quadratic family");
    // the stored parts share one scale factor, so they have the same minimiser
    let b = data.objective.load().map_or_else(|| vec![0.0; x0.len()], <[f64]>::to_vec);
    let r = pgs_solve(q, &b, &data.bounds, &x0, &SmootherConfig::new(1e-9, 1000))?;
    println!(
        "projected Gauss-Seidel: {} sweeps, residual {:.2e}",
        r.iterations,
        kkt_residual(&data.objective, &data.bounds, &r.x)?
    );
    let gap = gp.iter().zip(&r.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest difference between the two solutions: {gap:.1e}");
    Ok(())
}
