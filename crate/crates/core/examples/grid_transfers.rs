//! Nested grids, prolongation and restriction.

use fomg::build_hierarchy;

fn main() -> fomg::Result<()> {
    let hier = build_hierarchy(4)?;
    for level in hier.levels() {
        println!("level {}: {}x{} interior nodes, h = {}", level.index, level.m, level.m, level.h);
    }

    // a constant coarse field prolongates to a constant in the interior
    let k = 3;
    let coarse = vec![1.0; hier.level(k - 1).n];
    let fine = hier.prolongate(k, &coarse)?;
    let m = hier.level(k).m;
    println!("P·1 at the centre: {}, next to the boundary: {}", fine[(m / 2) * m + m / 2], fine[0]);

    // restriction is a quarter of the transpose
    let w: Vec<f64> = (0..hier.level(k).n).map(|i| (i as f64 * 0.37).sin()).collect();
    let v: Vec<f64> = (0..hier.level(k - 1).n).map(|i| (i as f64 * 0.11).cos()).collect();
    let lhs: f64 = fine_dot(&hier.prolongate(k, &v)?, &w);
    let rhs: f64 = 4.0 * fine_dot(&v, &hier.restrict(k, &w)?);
    println!("(Pv)·w = {lhs:.12}, 4 v·(Rw) = {rhs:.12}");

    // bound restriction takes the neighbourhood maximum
    let y: Vec<f64> = (0..hier.level(k).n).map(|i| -((i % 7) as f64)).collect();
    let lower = hier.restrict_bounds_max(k, &y)?;
    println!("first coarse lower bounds: {:?}", &lower[..5]);
    Ok(())
}

fn fine_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
