use crate::error::{check_len, Result};
use crate::objective::{dot, Objective};
use crate::sparse::CsrMatrix;

use super::surface::SurfaceTerm;

/// Pointwise nonlinearity `Σᵢ wᵢ N(xᵢ)` with lumped weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodalKind {
    /// `N(u) = -(u eᵘ - eᵘ)`
    NegExpEnergy,
    /// `N(u) = -u³ / 6`
    NegCubic,
}

impl NodalKind {
    #[inline]
    pub fn value_at(self, u: f64) -> f64 {
        match self {
            NodalKind::NegExpEnergy => -(u - 1.0) * u.exp(),
            NodalKind::NegCubic => -u * u * u / 6.0,
        }
    }

    #[inline]
    pub fn derivative_at(self, u: f64) -> f64 {
        match self {
            NodalKind::NegExpEnergy => -u * u.exp(),
            NodalKind::NegCubic => -0.5 * u * u,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodalTerm {
    pub kind: NodalKind,
    pub weights: Vec<f64>,
}

/// Objective of one level, built from optional parts:
///
/// `f(x) = scale · (½ xᵀQx − qᵀx + Σᵢ wᵢ N(xᵢ) + area(x))`
///
/// The parts are stored in finite-element units; `scale` is applied by the
/// [`Objective`] implementation only.
#[derive(Debug, Clone)]
pub struct LevelObjective {
    pub(crate) n: usize,
    pub(crate) scale: f64,
    pub(crate) stiffness: Option<CsrMatrix>,
    pub(crate) load: Option<Vec<f64>>,
    pub(crate) nodal: Option<NodalTerm>,
    pub(crate) surface: Option<SurfaceTerm>,
}

impl LevelObjective {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            scale: 1.0,
            stiffness: None,
            load: None,
            nodal: None,
            surface: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_stiffness(mut self, q: CsrMatrix) -> Self {
        assert_eq!(q.nrows(), self.n);
        self.stiffness = Some(q);
        self
    }

    pub fn with_load(mut self, q: Vec<f64>) -> Self {
        assert_eq!(q.len(), self.n);
        self.load = Some(q);
        self
    }

    pub fn with_nodal(mut self, kind: NodalKind, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.n);
        self.nodal = Some(NodalTerm { kind, weights });
        self
    }

    pub fn with_surface(mut self, s: SurfaceTerm) -> Self {
        self.surface = Some(s);
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn stiffness(&self) -> Option<&CsrMatrix> {
        self.stiffness.as_ref()
    }

    pub fn load(&self) -> Option<&[f64]> {
        self.load.as_deref()
    }

    pub fn nodal(&self) -> Option<&NodalTerm> {
        self.nodal.as_ref()
    }

    pub fn surface(&self) -> Option<&SurfaceTerm> {
        self.surface.as_ref()
    }

    /// `true` when the objective is exactly `½ xᵀQx − qᵀx`.
    pub fn is_quadratic(&self) -> bool {
        self.stiffness.is_some() && self.nodal.is_none() && self.surface.is_none()
    }

    /// Value in finite-element units (without `scale`).
    pub fn raw_value(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        if let Some(q) = &self.stiffness {
            f += 0.5 * q.quadratic_form(x);
        }
        if let Some(b) = &self.load {
            f -= dot(b, x);
        }
        if let Some(t) = &self.nodal {
            f += t
                .weights
                .iter()
                .zip(x)
                .map(|(w, &u)| if *w == 0.0 { 0.0 } else { w * t.kind.value_at(u) })
                .sum::<f64>();
        }
        if let Some(s) = &self.surface {
            f += s.value(x);
        }
        f
    }

    /// Gradient in finite-element units (without `scale`).
    pub fn raw_gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        match &self.surface {
            Some(s) => s.gradient_into(x, grad),
            None => grad.iter_mut().for_each(|g| *g = 0.0),
        }
        if let Some(q) = &self.stiffness {
            let mut qx = vec![0.0; self.n];
            q.mul_vec_into(x, &mut qx);
            grad.iter_mut().zip(&qx).for_each(|(g, v)| *g += v);
        }
        if let Some(b) = &self.load {
            grad.iter_mut().zip(b).for_each(|(g, v)| *g -= v);
        }
        if let Some(t) = &self.nodal {
            for ((g, w), &u) in grad.iter_mut().zip(&t.weights).zip(x) {
                if *w != 0.0 {
                    *g += w * t.kind.derivative_at(u);
                }
            }
        }
    }

    /// Truncated copy: rows and columns of `Q` and entries of `q` at flagged
    /// nodes are zeroed, nodal weights there set to zero, and surface values
    /// there frozen (their gradient components become zero).
    pub fn truncate(&self, mask: &[bool]) -> Result<LevelObjective> {
        check_len(self.n, mask.len())?;
        let mut out = self.clone();
        if let Some(q) = &self.stiffness {
            out.stiffness = Some(q.without_rows_cols(mask)?);
        }
        if let Some(b) = out.load.as_mut() {
            zero_masked(b, mask);
        }
        if let Some(t) = out.nodal.as_mut() {
            zero_masked(&mut t.weights, mask);
        }
        if let Some(s) = out.surface.as_mut() {
            s.freeze(mask);
        }
        Ok(out)
    }
}

pub(crate) fn zero_masked(v: &mut [f64], mask: &[bool]) {
    for (x, &m) in v.iter_mut().zip(mask) {
        if m {
            *x = 0.0;
        }
    }
}

impl Objective for LevelObjective {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.raw_value(x)
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        self.raw_gradient_into(x, grad);
        if self.scale != 1.0 {
            grad.iter_mut().for_each(|g| *g *= self.scale);
        }
    }
}
