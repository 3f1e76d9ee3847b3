//! Bounds plus a fixed sum: the equality target travels down the cycle.

use fomg::multigrid::{reference_solution, solve, VCycleConfig, Variant};
use fomg::problems::{Family, Problem};

fn main() -> fomg::Result<()> {
    let level = 5;
    let p = Problem::build(Family::Equality, level)?;
    let gamma = p.level(level).equality.expect("equality family");
    let r = reference_solution(&p, 1e-11)?;
    println!("target sum {gamma}, reference sum {:.6}", r.x.iter().sum::<f64>());

    let rep = solve(&p, &VCycleConfig::gp(Variant::FasPlain, 1), Some(&r.x))?;
    for (t, (e, res)) in rep.errors.iter().skip(1).zip(&rep.equality_residuals).enumerate() {
        println!("cycle {:>2}: error {e:.3e}, relative sum residual {res:.1e}", t + 1);
    }
    println!(
        "rate {:.3}, feasible {}",
        rep.rate.map_or(f64::NAN, |r| r.rate),
        rep.feasible
    );
    Ok(())
}
