//! The quadratic spiral obstacle problem with all three cycle variants.
//! Gauss-Seidel sweeps read the matrix directly and are not counted as
//! function or gradient evaluations.

use fomg::multigrid::{reference_solution, solve, SmootherKind, VCycleConfig, Variant};
use fomg::problems::{Family, Problem};

fn main() -> fomg::Result<()> {
    let level = 5;
    let p = Problem::build(Family::Spiral, level)?;
    let r = reference_solution(&p, 1e-11)?;
    let active = r.x.iter().zip(&p.level(level).bounds.lower).filter(|(x, l)| x == l).count();
    println!("{} unknowns, {active} on the obstacle", r.x.len());

    for variant in Variant::ALL {
        for (smoother, nu) in [(SmootherKind::Gsp, 1), (SmootherKind::Gp, 2)] {
            let cfg = VCycleConfig {
                smoother,
                ..VCycleConfig::gp(variant, nu)
            };
            let rep = solve(&p, &cfg, Some(&r.x))?;
            println!(
                "{:>13} {smoother}-{nu}: {:>2} cycles, rate {:.3}, finest evaluations {:>4}, all levels {:>5}",
                variant.name(),
                rep.cycles,
                rep.rate.as_ref().map_or(f64::NAN, |r| r.rate),
                rep.finest_evals(),
                rep.total_evals()
            );
        }
    }
    Ok(())
}
