//! Objective functions seen by the smoothers, plus evaluation counters.

use std::cell::Cell;

use crate::sparse::CsrMatrix;

/// A differentiable function of a flat vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient_into(x, grad)
    }
}

/// Function and gradient call counts for one level.
#[derive(Debug, Default, Clone)]
pub struct EvalCounter {
    values: Cell<u64>,
    gradients: Cell<u64>,
}

impl EvalCounter {
    pub fn values(&self) -> u64 {
        self.values.get()
    }

    pub fn gradients(&self) -> u64 {
        self.gradients.get()
    }

    pub fn total(&self) -> u64 {
        self.values() + self.gradients()
    }

    pub(crate) fn bump_value(&self) {
        self.values.set(self.values.get() + 1);
    }

    pub(crate) fn bump_gradient(&self) {
        self.gradients.set(self.gradients.get() + 1);
    }
}

/// One counter per level of a hierarchy; owned by a single solve.
#[derive(Debug, Clone)]
pub struct EvalCounts {
    levels: Vec<EvalCounter>,
}

impl EvalCounts {
    pub fn new(levels: usize) -> Self {
        Self {
            levels: vec![EvalCounter::default(); levels],
        }
    }

    pub fn level(&self, k: usize) -> &EvalCounter {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Function plus gradient calls summed over all levels.
    pub fn total(&self) -> u64 {
        self.levels.iter().map(EvalCounter::total).sum()
    }

    pub fn per_level_totals(&self) -> Vec<u64> {
        self.levels.iter().map(EvalCounter::total).collect()
    }
}

/// Wraps an objective so that every call is recorded in `counter`.
pub struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    counter: &'a EvalCounter,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub fn new(inner: &'a O, counter: &'a EvalCounter) -> Self {
        Self { inner, counter }
    }
}

impl<O: Objective + ?Sized> Objective for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.counter.bump_value();
        self.inner.value(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.counter.bump_gradient();
        self.inner.gradient_into(x, grad)
    }
}

/// `f(x) - vᵀx`, the coarse-level problem of the full approximation scheme.
pub struct ShiftedObjective<'a, O: ?Sized> {
    base: &'a O,
    shift: &'a [f64],
}

impl<'a, O: Objective + ?Sized> ShiftedObjective<'a, O> {
    pub fn new(base: &'a O, shift: &'a [f64]) -> Self {
        debug_assert_eq!(base.dim(), shift.len());
        Self { base, shift }
    }
}

impl<O: Objective + ?Sized> Objective for ShiftedObjective<'_, O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) - dot(self.shift, x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.base.gradient_into(x, grad);
        for (g, v) in grad.iter_mut().zip(self.shift) {
            *g -= v;
        }
    }
}

/// `½ xᵀQx - bᵀx`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub matrix: CsrMatrix,
    pub linear: Vec<f64>,
}

impl Quadratic {
    pub fn new(matrix: CsrMatrix, linear: Vec<f64>) -> Self {
        assert_eq!(matrix.nrows(), linear.len());
        Self { matrix, linear }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.matrix.quadratic_form(x) - dot(&self.linear, x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.matrix.mul_vec_into(x, grad);
        for (g, b) in grad.iter_mut().zip(&self.linear) {
            *g -= b;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_calls_are_attributed() {
        let q = Quadratic::new(CsrMatrix::identity(2), vec![1.0, 0.0]);
        let counts = EvalCounts::new(2);
        let f = Counted::new(&q, counts.level(1));
        f.value(&[0.0, 0.0]);
        f.gradient(&[0.0, 0.0]);
        f.gradient(&[1.0, 0.0]);
        assert_eq!(counts.level(1).values(), 1);
        assert_eq!(counts.level(1).gradients(), 2);
        assert_eq!(counts.level(0).total(), 0);
        assert_eq!(counts.total(), 3);
    }

    #[test]
    fn shift_is_subtracted() {
        let q = Quadratic::new(CsrMatrix::identity(2), vec![0.0, 0.0]);
        let v = [1.0, -2.0];
        let s = ShiftedObjective::new(&q, &v);
        let x = [3.0, 1.0];
        assert_eq!(s.value(&x), 5.0 - (3.0 - 2.0));
        assert_eq!(s.gradient(&x), vec![2.0, 3.0]);
    }

    #[test]
    fn quadratic_at_zero() {
        let q = Quadratic::new(CsrMatrix::identity(3), vec![1.0, 2.0, 3.0]);
        assert_eq!(q.value(&[0.0; 3]), 0.0);
        assert_eq!(q.gradient(&[0.0; 3]), vec![-1.0, -2.0, -3.0]);
    }
}
