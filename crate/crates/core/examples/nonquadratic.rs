//! Obstacle problem with an exponential term: truncated and plain cycles.

use fomg::multigrid::{reference_solution, solve, VCycleConfig, Variant};
use fomg::problems::{Family, Problem};

fn main() -> fomg::Result<()> {
    for level in [4, 5] {
        let p = Problem::build(Family::Nonquadratic, level)?;
        let r = reference_solution(&p, 1e-11)?;
        for variant in [Variant::FasTruncated, Variant::FasPlain] {
            for nu in [1, 3] {
                let rep = solve(&p, &VCycleConfig::gp(variant, nu), Some(&r.x))?;
                println!(
                    "level {level} {:>13} GP-{nu}: rate {:.3}, {} cycles, feasible {}",
                    variant.name(),
                    rep.rate.map_or(f64::NAN, |r| r.rate),
                    rep.cycles,
                    rep.feasible
                );
            }
        }
    }
    Ok(())
}
