use crate::error::{check_len, Error, Result};
use crate::problems::BoundSet;

/// Componentwise clip onto `[lower, upper]`. Clipped entries are the bound
/// values themselves, so active-set tests can compare with `==`.
pub fn project_box(x: &[f64], bounds: &BoundSet) -> Vec<f64> {
    let mut out = x.to_vec();
    project_box_in_place(&mut out, bounds);
    out
}

pub fn project_box_in_place(x: &mut [f64], bounds: &BoundSet) {
    for ((v, &lo), &up) in x.iter_mut().zip(&bounds.lower).zip(&bounds.upper) {
        *v = clip(*v, lo, up);
    }
}

#[inline]
pub(crate) fn clip(v: f64, lo: f64, up: f64) -> f64 {
    if v <= lo {
        lo
    } else if v >= up {
        up
    } else {
        v
    }
}

/// Euclidean projection onto `{z : lower ≤ z ≤ upper, Σ zᵢ = target}`.
///
/// The projection is `clip(x - λ)` for the scalar `λ` solving
/// `Σ clip(xᵢ - λ) = target`; the piecewise linear left-hand side is scanned
/// over its sorted breakpoints.
pub fn project_box_hyperplane(x: &[f64], bounds: &BoundSet, target: f64) -> Result<Vec<f64>> {
    check_len(bounds.len(), x.len())?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let lo_sum: f64 = bounds.lower.iter().sum();
    let up_sum: f64 = bounds.upper.iter().sum();
    if lo_sum > target || up_sum < target || x.is_empty() {
        return Err(Error::EmptyFeasibleSet { target });
    }
    if lo_sum == target {
        return Ok(bounds.lower.clone());
    }
    if up_sum == target {
        return Ok(bounds.upper.clone());
    }

    // Walking λ upwards, component i sits at its upper bound until
    // λ = xᵢ - ψᵢ, is free until λ = xᵢ - φᵢ, and sits at its lower bound after.
    // Between events Σ clip(x - λ) = constant - free·λ.
    #[derive(Clone, Copy)]
    enum Event {
        Release(usize),
        Pin(usize),
    }
    let mut events: Vec<(f64, Event)> = Vec::with_capacity(2 * x.len());
    let mut constant = 0.0;
    let mut free = 0usize;
    for (i, &xi) in x.iter().enumerate() {
        let (lo, up) = (bounds.lower[i], bounds.upper[i]);
        if up.is_finite() {
            constant += up;
            events.push((xi - up, Event::Release(i)));
        } else {
            constant += xi;
            free += 1;
        }
        if lo.is_finite() {
            events.push((xi - lo, Event::Pin(i)));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut lambda = None;
    for &(at, event) in &events {
        let value = constant - free as f64 * at;
        if value <= target {
            lambda = Some(if free == 0 {
                at
            } else {
                (constant - target) / free as f64
            });
            break;
        }
        match event {
            Event::Release(i) => {
                constant += x[i] - bounds.upper[i];
                free += 1;
            }
            Event::Pin(i) => {
                constant += bounds.lower[i] - x[i];
                free -= 1;
            }
        }
    }
    let lambda = match lambda {
        Some(l) => l,
        None if free > 0 => (constant - target) / free as f64,
        None => return Err(Error::EmptyFeasibleSet { target }),
    };

    let mut out: Vec<f64> = x
        .iter()
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|(&xi, (&lo, &up))| clip(xi - lambda, lo, up))
        .collect();

    // one refinement over the free components to remove rounding drift
    let free_idx: Vec<usize> = (0..out.len())
        .filter(|&i| out[i] != bounds.lower[i] && out[i] != bounds.upper[i])
        .collect();
    if !free_idx.is_empty() {
        let excess = (out.iter().sum::<f64>() - target) / free_idx.len() as f64;
        for &i in &free_idx {
            out[i] = clip(out[i] - excess, bounds.lower[i], bounds.upper[i]);
        }
    }
    Ok(out)
}
