//! Gradient-only smoothers and solvers: steepest descent and gradient
//! projection with a gradient-based line search, projected Gauss-Seidel for
//! quadratics, and an Armijo projected gradient method for a box intersected
//! with one hyperplane `Σ xᵢ = γ`.

mod line_search;
mod projection;

pub use line_search::{
    line_search_projected, line_search_unconstrained, LineSearchResult, StepState, MAX_STEP_CHANGES,
};
pub use projection::{project_box, project_box_hyperplane, project_box_in_place};
pub use crate::objective::ShiftedObjective;

use crate::error::{check_len, Error, Result};
use crate::objective::{distance, dot, norm, Objective};
use crate::problems::BoundSet;
use crate::sparse::CsrMatrix;

use projection::clip;

/// Armijo sufficient-decrease constant.
pub const ARMIJO_SIGMA: f64 = 1e-4;

/// Relative size below which a change in objective value is treated as
/// rounding noise by the Armijo test.
/// An Armijo trial whose model minimiser lies before this fraction of the
/// step is shortened to that minimiser once per iteration.
const INTERPOLATION_CUT: f64 = 0.9;
const ROUNDOFF_ZONE: f64 = 1e-10;

/// Stopping rule and step growth of one smoother call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    /// Stop once the stationarity residual is at most this.
    pub tolerance: f64,
    /// Iteration budget.
    pub max_iter: usize,
    /// Step growth factor `c > 1` of the line search.
    pub growth: f64,
}

impl SmootherConfig {
    pub fn new(tolerance: f64, max_iter: usize) -> Self {
        Self {
            tolerance,
            max_iter,
            growth: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmootherReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Stationarity residual at `x` when the call ended.
    pub residual: f64,
    /// Some step search could not find a descent step and the call ended early.
    pub stalled: bool,
}

/// `‖x - [x - g]‖` for a precomputed gradient.
pub fn projected_gradient_residual(x: &[f64], g: &[f64], bounds: &BoundSet) -> f64 {
    let mut sum = 0.0;
    for i in 0..x.len() {
        let d = x[i] - clip(x[i] - g[i], bounds.lower[i], bounds.upper[i]);
        sum += d * d;
    }
    sum.sqrt()
}

/// Fixed-point residual of the gradient projection map, `‖x - [x - ∇f(x)]‖`.
pub fn kkt_residual<O: Objective + ?Sized>(f: &O, bounds: &BoundSet, x: &[f64]) -> Result<f64> {
    check_len(bounds.len(), x.len())?;
    let g = f.gradient(x);
    Ok(projected_gradient_residual(x, &g, bounds))
}

/// The same residual with the projection onto the box and the hyperplane.
pub fn kkt_residual_with_sum<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    target: f64,
    x: &[f64],
) -> Result<f64> {
    check_len(bounds.len(), x.len())?;
    let g = f.gradient(x);
    let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
    Ok(distance(x, &project_box_hyperplane(&y, bounds, target)?))
}

/// Steepest descent with the gradient-based line search, until
/// `‖∇f‖ ≤ tolerance` or the iteration budget is spent.
pub fn sd_solve<O: Objective + ?Sized>(
    f: &O,
    x0: &[f64],
    cfg: &SmootherConfig,
    state: &mut StepState,
) -> Result<SmootherReport> {
    let mut x = x0.to_vec();
    if cfg.max_iter == 0 {
        return Ok(SmootherReport {
            x,
            iterations: 0,
            residual: f64::NAN,
            stalled: false,
        });
    }
    let mut g = f.gradient(&x);
    let mut residual = norm(&g);
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < cfg.max_iter && residual > cfg.tolerance {
        let ls = line_search_unconstrained(f, &x, &g, state.current(), cfg.growth)?;
        if ls.capped {
            stalled = true;
            break;
        }
        state.accept(ls.step);
        x = ls.point;
        g = ls.gradient;
        residual = norm(&g);
        iterations += 1;
    }
    Ok(SmootherReport {
        x,
        iterations,
        residual,
        stalled,
    })
}

/// Gradient projection with the gradient-based projected line search.
///
/// The starting point is projected first, so it may be infeasible. Stops when
/// the projected-gradient residual is at most `tolerance` or after
/// `max_iter` steps; a zero budget returns the projected start.
pub fn gp_solve<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    x0: &[f64],
    cfg: &SmootherConfig,
    state: &mut StepState,
) -> Result<SmootherReport> {
    gp_solve_monitored(f, bounds, x0, cfg, state, |_, _| false)
}

/// [`gp_solve`] with a hook called before every step; returning `true` ends
/// the run.
pub fn gp_solve_monitored<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    x0: &[f64],
    cfg: &SmootherConfig,
    state: &mut StepState,
    mut stop: impl FnMut(usize, &[f64]) -> bool,
) -> Result<SmootherReport> {
    check_len(bounds.len(), x0.len())?;
    let mut x = project_box(x0, bounds);
    if cfg.max_iter == 0 {
        return Ok(SmootherReport {
            x,
            iterations: 0,
            residual: f64::NAN,
            stalled: false,
        });
    }
    let mut g = f.gradient(&x);
    let mut residual = projected_gradient_residual(&x, &g, bounds);
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < cfg.max_iter && residual > cfg.tolerance {
        if stop(iterations, &x) {
            break;
        }
        let ls = line_search_projected(f, &x, &g, bounds, state.current(), cfg.growth)?;
        let (step, point, gradient) = if ls.capped {
            match armijo_box_step(f, bounds, &x, &g, state.current())? {
                Some(found) => found,
                None => {
                    stalled = true;
                    break;
                }
            }
        } else {
            (ls.step, ls.point, ls.gradient)
        };
        state.accept(step);
        x = point;
        g = gradient;
        residual = projected_gradient_residual(&x, &g, bounds);
        iterations += 1;
    }
    Ok(SmootherReport {
        x,
        iterations,
        residual,
        stalled,
    })
}

/// Step length, new point and its gradient.
type AcceptedStep = (f64, Vec<f64>, Vec<f64>);

/// Backtracking fallback for when the gradient-based search fails to bracket.
fn armijo_box_step<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    x: &[f64],
    g: &[f64],
    s0: f64,
) -> Result<Option<AcceptedStep>> {
    let fx = f.value(x);
    let mut s = s0;
    for _ in 0..MAX_STEP_CHANGES {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - s * b).collect();
        let p = project_box(&trial, bounds);
        let d: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        if norm(&d) == 0.0 {
            return Ok(None);
        }
        let fp = f.value(&p);
        if fp <= fx + ARMIJO_SIGMA * dot(g, &d) && fp < fx {
            let gp = f.gradient(&p);
            return Ok(Some((s, p, gp)));
        }
        s *= 0.5;
    }
    Ok(None)
}

/// One projected Gauss-Seidel sweep in ascending index order for
/// `½ xᵀQx - bᵀx`. Rows that are entirely zero (with zero right-hand side)
/// are left untouched.
pub fn pgs_sweep(q: &CsrMatrix, b: &[f64], bounds: &BoundSet, x: &mut [f64]) -> Result<()> {
    check_len(q.nrows(), x.len())?;
    check_len(q.nrows(), b.len())?;
    check_len(bounds.len(), x.len())?;
    for i in 0..x.len() {
        let mut diag = 0.0;
        let mut off = 0.0;
        let mut empty = true;
        for (j, v) in q.row(i) {
            if v != 0.0 {
                empty = false;
            }
            if j == i {
                diag = v;
            } else {
                off += v * x[j];
            }
        }
        if diag == 0.0 {
            if empty && b[i] == 0.0 {
                continue;
            }
            return Err(Error::ZeroDiagonal(i));
        }
        x[i] = clip((b[i] - off) / diag, bounds.lower[i], bounds.upper[i]);
    }
    Ok(())
}

/// Repeated [`pgs_sweep`]s from the projected start until the projected
/// gradient residual drops to `tolerance` or `max_iter` sweeps are done.
pub fn pgs_solve(
    q: &CsrMatrix,
    b: &[f64],
    bounds: &BoundSet,
    x0: &[f64],
    cfg: &SmootherConfig,
) -> Result<SmootherReport> {
    let mut x = project_box(x0, bounds);
    let residual_at = |x: &[f64]| -> f64 {
        let mut g = vec![0.0; x.len()];
        q.mul_vec_into(x, &mut g);
        g.iter_mut().zip(b).for_each(|(gi, bi)| *gi -= bi);
        projected_gradient_residual(x, &g, bounds)
    };
    let mut residual = residual_at(&x);
    let mut iterations = 0;
    while iterations < cfg.max_iter && residual > cfg.tolerance {
        pgs_sweep(q, b, bounds, &mut x)?;
        iterations += 1;
        residual = residual_at(&x);
    }
    Ok(SmootherReport {
        x,
        iterations,
        residual,
        stalled: false,
    })
}

/// Projected gradient on `{lower ≤ x ≤ upper, Σ xᵢ = target}` with
/// backtracking Armijo steps (σ = 1e-4, halving).
///
/// Each search starts from `growth` times the previously accepted step.
/// Stops when the projected-gradient residual is at most `tolerance`, after
/// `max_iter` steps, or when 60 halvings fail. The gradient is used with its
/// mean removed: both the projection and `gᵀd` are unchanged by constant
/// shifts on the hyperplane, and the large multiplier component would
/// otherwise drown `gᵀd` in rounding. When the value change is within
/// rounding of `f(x)`, the decrease is estimated from gradients.
///
/// Once per iteration, a trial whose one-dimensional quadratic model has its
/// minimiser below `0.9·s` is cut back to that minimiser (at least `0.1·s`)
/// before the Armijo test. Without this cut the accepted steps settle near
/// `2/λ_max`, where high frequencies are barely damped.
pub fn armijo_pg_solve<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    target: f64,
    x0: &[f64],
    cfg: &SmootherConfig,
    state: &mut StepState,
) -> Result<SmootherReport> {
    armijo_pg_solve_monitored(f, bounds, target, x0, cfg, state, |_, _| false)
}

/// [`armijo_pg_solve`] with a hook called before every step; returning
/// `true` ends the run.
pub fn armijo_pg_solve_monitored<O: Objective + ?Sized>(
    f: &O,
    bounds: &BoundSet,
    target: f64,
    x0: &[f64],
    cfg: &SmootherConfig,
    state: &mut StepState,
    mut stop: impl FnMut(usize, &[f64]) -> bool,
) -> Result<SmootherReport> {
    check_len(bounds.len(), x0.len())?;
    let mut x = project_box_hyperplane(x0, bounds, target)?;
    if cfg.max_iter == 0 {
        return Ok(SmootherReport {
            x,
            iterations: 0,
            residual: f64::NAN,
            stalled: false,
        });
    }
    let mut fx = f.value(&x);
    let mut g = centered(&x, bounds, f.gradient(&x));
    let residual_at = |x: &[f64], g: &[f64]| -> Result<f64> {
        let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        Ok(distance(x, &project_box_hyperplane(&y, bounds, target)?))
    };
    let mut residual = residual_at(&x, &g)?;
    let mut iterations = 0;
    let mut stalled = false;
    'outer: while iterations < cfg.max_iter && residual > cfg.tolerance {
        if stop(iterations, &x) {
            break;
        }
        let mut s = state.current() * cfg.growth;
        let mut interpolated = false;
        for _ in 0..MAX_STEP_CHANGES {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - s * b).collect();
            let p = project_box_hyperplane(&y, bounds, target)?;
            let d: Vec<f64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&d) == 0.0 {
                break 'outer;
            }
            let fp = f.value(&p);
            let slope = dot(&g, &d);
            let mut gp = None;
            let mut decrease = fp - fx;
            // curvature of f along the segment x → p
            let mut curvature = 2.0 * (decrease - slope);
            if decrease.abs() <= ROUNDOFF_ZONE * fx.abs().max(1.0) {
                // the value difference is lost in rounding; use the
                // trapezoidal estimate from the two gradients instead
                let gnew = centered(&p, bounds, f.gradient(&p));
                let end_slope = dot(&gnew, &d);
                decrease = 0.5 * (slope + end_slope);
                curvature = end_slope - slope;
                gp = Some(gnew);
            }
            // cut an overlong first trial back to the minimiser of the
            // quadratic model along the segment
            if !interpolated && slope < 0.0 && curvature > 0.0 {
                let t = -slope / curvature;
                if t < INTERPOLATION_CUT {
                    interpolated = true;
                    s *= t.max(0.1);
                    continue;
                }
            }
            if decrease <= ARMIJO_SIGMA * slope {
                state.accept(s);
                x = p;
                fx = fp;
                g = gp.unwrap_or_else(|| centered(&x, bounds, f.gradient(&x)));
                residual = residual_at(&x, &g)?;
                iterations += 1;
                continue 'outer;
            }
            s *= 0.5;
        }
        stalled = true;
        break;
    }
    Ok(SmootherReport {
        x,
        iterations,
        residual,
        stalled,
    })
}

/// Removes the mean of `g` over the components of `x` strictly inside the
/// bounds (over all components if there are none), which estimates the
/// multiplier of the sum constraint.
fn centered(x: &[f64], bounds: &BoundSet, mut g: Vec<f64>) -> Vec<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..g.len() {
        if bounds.lower[i] < x[i] && x[i] < bounds.upper[i] {
            sum += g[i];
            count += 1;
        }
    }
    if count == 0 {
        sum = g.iter().sum();
        count = g.len();
    }
    if count > 0 {
        let mean = sum / count as f64;
        g.iter_mut().for_each(|v| *v -= mean);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;

    fn quad(entries: &[(usize, usize, f64)], n: usize, b: Vec<f64>) -> Quadratic {
        Quadratic::new(CsrMatrix::from_triplets(n, n, entries), b)
    }

    #[test]
    fn sd_stops_at_minimizer() {
        let f = quad(&[(0, 0, 2.0), (1, 1, 1.0)], 2, vec![2.0, 1.0]);
        let mut st = StepState::default();
        let r = sd_solve(&f, &[1.0, 1.0], &SmootherConfig::new(1e-12, 100), &mut st).unwrap();
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn sd_converges_in_one_dimension() {
        let f = quad(&[(0, 0, 3.0)], 1, vec![0.0]);
        let mut st = StepState::default();
        let r = sd_solve(&f, &[5.0], &SmootherConfig::new(1e-10, 200), &mut st).unwrap();
        assert!(r.x[0].abs() < 1e-10);
    }

    #[test]
    fn sd_decreases_monotonically() {
        let f = quad(&[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], 2, vec![1.0, -1.0]);
        let mut st = StepState::default();
        let mut x = vec![3.0, -2.0];
        for _ in 0..20 {
            let r = sd_solve(&f, &x, &SmootherConfig::new(0.0, 1), &mut st).unwrap();
            if r.iterations == 0 {
                break;
            }
            assert!(f.value(&r.x) < f.value(&x));
            x = r.x;
        }
    }

    #[test]
    fn gp_zero_budget_projects() {
        let f = quad(&[(0, 0, 1.0)], 1, vec![0.0]);
        let b = BoundSet::new(vec![1.0], vec![2.0]).unwrap();
        let mut st = StepState::default();
        let r = gp_solve(&f, &b, &[-3.0], &SmootherConfig::new(1e-9, 0), &mut st).unwrap();
        assert_eq!(r.x, vec![1.0]);
    }

    #[test]
    fn gp_unconstrained_quadratic_to_tolerance() {
        let f = quad(
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 1.5)],
            3,
            vec![1.0, 0.0, 3.0],
        );
        let b = BoundSet::unbounded(3);
        let mut st = StepState::default();
        let r = gp_solve(&f, &b, &[0.0; 3], &SmootherConfig::new(1e-9, 10_000), &mut st).unwrap();
        assert!(norm(&f.gradient(&r.x)) <= 1e-9);
    }

    #[test]
    fn gp_keeps_optimal_point() {
        // minimiser of ½x² - 2x on [0, 1] is the upper bound
        let f = quad(&[(0, 0, 1.0)], 1, vec![2.0]);
        let b = BoundSet::new(vec![0.0], vec![1.0]).unwrap();
        let mut st = StepState::default();
        let r = gp_solve(&f, &b, &[1.0], &SmootherConfig::new(1e-12, 10), &mut st).unwrap();
        assert_eq!(r.x, vec![1.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(kkt_residual(&f, &b, &r.x).unwrap(), 0.0);
    }

    #[test]
    fn kkt_residual_with_wide_bounds() {
        let f = Quadratic::new(CsrMatrix::zeros(2, 2), vec![-1.0, 0.0]);
        let b = BoundSet::new(vec![-10.0; 2], vec![10.0; 2]).unwrap();
        assert_eq!(kkt_residual(&f, &b, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn pgs_scalar_cases() {
        let q = CsrMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]);
        let mut x = vec![0.0];
        pgs_sweep(&q, &[4.0], &BoundSet::unbounded(1), &mut x).unwrap();
        assert_eq!(x, vec![2.0]);
        let mut x = vec![0.0];
        let b = BoundSet::new(vec![f64::NEG_INFINITY], vec![1.0]).unwrap();
        pgs_sweep(&q, &[4.0], &b, &mut x).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn pgs_rejects_zero_diagonal() {
        let q = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let mut x = vec![0.0; 2];
        assert!(matches!(
            pgs_sweep(&q, &[1.0, 1.0], &BoundSet::unbounded(2), &mut x),
            Err(Error::ZeroDiagonal(0))
        ));
    }

    #[test]
    fn armijo_keeps_sum_and_reaches_kkt() {
        // separable: ½ Σ dᵢ xᵢ² - cᵢ xᵢ with Σ x = 1 on [0, 1]⁴
        let d = [1.0, 2.0, 3.0, 4.0];
        let c = [1.0, 0.5, -1.0, 2.0];
        let f = quad(&[(0, 0, d[0]), (1, 1, d[1]), (2, 2, d[2]), (3, 3, d[3])], 4, c.to_vec());
        let b = BoundSet::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        let mut st = StepState::default();
        let cfg = SmootherConfig::new(1e-12, 5000);
        let r = armijo_pg_solve(&f, &b, 1.0, &[0.0; 4], &cfg, &mut st).unwrap();
        assert!((r.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // multiplier μ: xᵢ = clip((cᵢ - μ)/dᵢ); here x = (0.2, 0, 0, 0.8)... solve by bisection
        let sum_at = |mu: f64| -> f64 { (0..4).map(|i| ((c[i] - mu) / d[i]).clamp(0.0, 1.0)).sum() };
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum_at(mid) > 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        for i in 0..4 {
            let expect = ((c[i] - lo) / d[i]).clamp(0.0, 1.0);
            assert!((r.x[i] - expect).abs() < 1e-9, "{i}: {} vs {expect}", r.x[i]);
        }
    }

    #[test]
    fn armijo_optimal_start_does_not_move() {
        let f = quad(&[(0, 0, 1.0), (1, 1, 1.0)], 2, vec![0.0, 0.0]);
        let b = BoundSet::unbounded(2);
        let mut st = StepState::default();
        let r = armijo_pg_solve(&f, &b, 2.0, &[1.0, 1.0], &SmootherConfig::new(1e-12, 10), &mut st)
            .unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
    }
}
