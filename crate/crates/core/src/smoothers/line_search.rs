//! Gradient-only step-length search: grow the step while the directional
//! derivative at the trial point stays negative, shrink it while it does not.

use crate::error::{Error, Result};
use crate::objective::{dot, Objective};
use crate::problems::BoundSet;

use super::projection::project_box;

/// Cap on doublings and on halvings within one search.
pub const MAX_STEP_CHANGES: usize = 60;

/// Step-length state carried between smoother calls on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    step: f64,
    initial: f64,
    warm_start: bool,
}

impl StepState {
    pub fn new(initial: f64) -> Self {
        assert!(initial > 0.0 && initial.is_finite());
        Self {
            step: initial,
            initial,
            warm_start: true,
        }
    }

    /// Every search restarts from the initial step.
    pub fn cold(initial: f64) -> Self {
        Self {
            warm_start: false,
            ..Self::new(initial)
        }
    }

    /// Step the next search starts from.
    pub fn current(&self) -> f64 {
        if self.warm_start {
            self.step
        } else {
            self.initial
        }
    }

    pub fn accept(&mut self, step: f64) {
        if step > 0.0 && step.is_finite() {
            self.step = step;
        }
    }
}

impl Default for StepState {
    fn default() -> Self {
        Self::new(1.0)
    }
}

/// Accepted trial of a line search.
#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub step: f64,
    pub point: Vec<f64>,
    /// Gradient at `point`, reusable by the caller.
    pub gradient: Vec<f64>,
    /// Directional derivative surrogate at `step` (negative on success).
    pub slope: f64,
    /// Surrogate at `growth · step`, when it was evaluated.
    pub slope_beyond: Option<f64>,
    /// No usable step: the halving cap was hit without finding a negative
    /// slope, or the bracketed point is not certified to decrease `f`.
    pub capped: bool,
    /// Gradient evaluations spent.
    pub trials: usize,
}

struct Trial {
    point: Vec<f64>,
    gradient: Vec<f64>,
    slope: f64,
    /// `∇f(p)ᵀ(x - p) > 0`, which by convexity implies `f(p) < f(x)`.
    decrease: bool,
}

/// `slope < 0` fails for zero and for NaN; both count as overshooting.
#[inline]
fn descending(t: &Trial) -> bool {
    t.slope < 0.0
}

fn bracket(s0: f64, growth: f64, mut eval: impl FnMut(f64) -> Trial) -> Result<LineSearchResult> {
    assert!(growth > 1.0, "growth factor must exceed 1");
    let mut s = s0;
    let mut cur = eval(s);
    let mut trials = 1;
    let done = |s: f64, t: Trial, beyond: Option<f64>, capped: bool, trials: usize| LineSearchResult {
        step: s,
        capped: capped || !t.decrease,
        point: t.point,
        gradient: t.gradient,
        slope: t.slope,
        slope_beyond: beyond,
        trials,
    };
    if descending(&cur) {
        for _ in 0..MAX_STEP_CHANGES {
            let next = eval(s * growth);
            trials += 1;
            if !descending(&next) {
                return Ok(done(s, cur, Some(next.slope), false, trials));
            }
            s *= growth;
            cur = next;
        }
        Err(Error::UnboundedDescent(MAX_STEP_CHANGES))
    } else {
        let mut above = cur.slope;
        for _ in 0..MAX_STEP_CHANGES {
            s /= growth;
            let next = eval(s);
            trials += 1;
            if descending(&next) {
                return Ok(done(s, next, Some(above), false, trials));
            }
            above = next.slope;
            cur = next;
        }
        Ok(done(s, cur, None, true, trials))
    }
}

/// Step along `-g` for an unconstrained objective; `g = ∇f(x)`.
pub fn line_search_unconstrained<O: Objective + ?Sized>(
    f: &O,
    x: &[f64],
    g: &[f64],
    initial_step: f64,
    growth: f64,
) -> Result<LineSearchResult> {
    bracket(initial_step, growth, |s| {
        let point: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - s * b).collect();
        let gradient = f.gradient(&point);
        let slope = -dot(g, &gradient);
        Trial {
            point,
            gradient,
            slope,
            decrease: true,
        }
    })
}

/// Step along the projected path `[x - s g]` for a box-constrained objective.
/// The slope surrogate ignores components that are active at the trial point.
/// The path can bend back downhill after a minimum, so the bracketed point
/// is reported as capped unless `∇f(p)ᵀ(x - p) > 0`, which for convex `f`
/// guarantees `f(p) < f(x)`.
pub fn line_search_projected<O: Objective + ?Sized>(
    f: &O,
    x: &[f64],
    g: &[f64],
    bounds: &BoundSet,
    initial_step: f64,
    growth: f64,
) -> Result<LineSearchResult> {
    bracket(initial_step, growth, |s| {
        let raw: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - s * b).collect();
        let point = project_box(&raw, bounds);
        let gradient = f.gradient(&point);
        let slope = -masked_dot(g, &gradient, &point, bounds);
        let decrease = x.iter().zip(&point).zip(&gradient).map(|((a, p), d)| d * (a - p)).sum::<f64>() > 0.0;
        Trial {
            point,
            gradient,
            slope,
            decrease,
        }
    })
}

/// `gᵀ [h]_A(p)`: the inner product skipping components active at `p`.
pub(crate) fn masked_dot(g: &[f64], h: &[f64], p: &[f64], bounds: &BoundSet) -> f64 {
    let mut sum = 0.0;
    for i in 0..g.len() {
        if p[i] != bounds.lower[i] && p[i] != bounds.upper[i] {
            sum += g[i] * h[i];
        }
    }
    sum
}
