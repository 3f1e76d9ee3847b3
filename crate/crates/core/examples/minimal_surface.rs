//! Minimal surface over an obstacle with both element terms.
//!
//! `Area` integrates `√(1 + |∇u|²)`. `Unscaled` integrates `√(1 + h²|∇u|²)`
//! on each mesh, which is milder for steep boundary data and converges much
//! faster under the multigrid cycles.

use fomg::multigrid::{reference_solution, solve, VCycleConfig, Variant};
use fomg::problems::{Family, Problem, ProblemOptions, SurfaceForm};

fn main() -> fomg::Result<()> {
    for form in [SurfaceForm::Area, SurfaceForm::Unscaled] {
        let options = ProblemOptions {
            surface_form: form,
            ..ProblemOptions::default()
        };
        for level in [2, 3, 4] {
            let p = Problem::build_with(Family::MinimalSurface, level, options)?;
            let r = reference_solution(&p, 1e-11)?;
            let rep = solve(&p, &VCycleConfig::gp(Variant::FasTruncated, 1), Some(&r.x))?;
            println!(
                "{:>8} level {level}: rate {:.3}, {} cycles, converged {}",
                form.name(),
                rep.rate.map_or(f64::NAN, |r| r.rate),
                rep.cycles,
                rep.converged
            );
        }
    }
    Ok(())
}
