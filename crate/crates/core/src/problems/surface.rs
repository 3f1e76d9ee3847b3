//! Area functional `Σ_e ∫_e √(1 + ‖∇u‖²)` on a level of bilinear elements
//! with fixed boundary values.

use serde::{Deserialize, Serialize};

use crate::hierarchy::GridLevel;

/// How `‖∇u‖²` is integrated over each element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceQuadrature {
    /// Element mean of `‖∇u‖²` from the 4×4 bilinear element stiffness
    /// matrix, `uₑᵀKuₑ / h²`.
    #[default]
    ElementStiffness,
    /// Gradient of the bilinear interpolant at the element centroid.
    Centroid,
}

/// What the square root is taken of on each element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceForm {
    /// `1 + ‖∇u‖²`: the area integrand.
    #[default]
    Area,
    /// `1 + h²‖∇u‖²`, i.e. `1 + uₑᵀKuₑ` with the unscaled element stiffness
    /// `K`. This is the area functional of `h·u`, so the problem changes
    /// with the mesh and becomes nearly quadratic on fine grids.
    Unscaled,
}

impl SurfaceForm {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceForm::Area => "area",
            SurfaceForm::Unscaled => "unscaled",
        }
    }
}

impl std::str::FromStr for SurfaceForm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "area" => Ok(SurfaceForm::Area),
            "unscaled" => Ok(SurfaceForm::Unscaled),
            _ => Err(crate::error::Error::Config(format!("unknown surface form `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceTerm {
    level: GridLevel,
    /// Values on the full `(m+2)²` grid; only the boundary ring is read.
    boundary: Vec<f64>,
    /// Nodes whose values are treated as constants (truncation).
    frozen: Vec<bool>,
    quadrature: SurfaceQuadrature,
    /// Factor on `∇u`: 1, or `h` for [`SurfaceForm::Unscaled`].
    sigma: f64,
}

impl SurfaceTerm {
    pub fn new(
        level: GridLevel,
        boundary_value: impl Fn(f64, f64) -> f64,
        quadrature: SurfaceQuadrature,
    ) -> Self {
        let side = level.m + 2;
        let mut boundary = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                if r == 0 || c == 0 || r == side - 1 || c == side - 1 {
                    boundary[r * side + c] = boundary_value(c as f64 * level.h, r as f64 * level.h);
                }
            }
        }
        Self {
            level,
            boundary,
            frozen: vec![false; level.n],
            quadrature,
            sigma: 1.0,
        }
    }

    pub fn with_form(mut self, form: SurfaceForm) -> Self {
        self.sigma = match form {
            SurfaceForm::Area => 1.0,
            SurfaceForm::Unscaled => self.level.h,
        };
        self
    }

    pub fn form(&self) -> SurfaceForm {
        if self.sigma == 1.0 {
            SurfaceForm::Area
        } else {
            SurfaceForm::Unscaled
        }
    }

    pub fn quadrature(&self) -> SurfaceQuadrature {
        self.quadrature
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub(crate) fn freeze(&mut self, mask: &[bool]) {
        for (f, &m) in self.frozen.iter_mut().zip(mask) {
            *f |= m;
        }
    }

    fn full_field(&self, x: &[f64]) -> Vec<f64> {
        let side = self.level.m + 2;
        let mut u = self.boundary.clone();
        for (row, chunk) in x.chunks_exact(self.level.m).enumerate() {
            let start = (row + 1) * side + 1;
            u[start..start + self.level.m].copy_from_slice(chunk);
        }
        u
    }

    /// Corner values of element `(r, c)` counter-clockwise from bottom-left,
    /// together with their full-grid indices.
    #[inline]
    fn corners(side: usize, r: usize, c: usize) -> [usize; 4] {
        let a = r * side + c;
        [a, a + 1, a + side + 1, a + side]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u = self.full_field(x);
        let side = self.level.m + 2;
        let h2 = self.level.h * self.level.h;
        let mut total = 0.0;
        for r in 0..side - 1 {
            for c in 0..side - 1 {
                let idx = Self::corners(side, r, c);
                let v = [u[idx[0]], u[idx[1]], u[idx[2]], u[idx[3]]];
                total += h2 * self.density(&v).0;
            }
        }
        total
    }

    /// Accumulates the gradient into `grad` (which is overwritten).
    pub fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        let u = self.full_field(x);
        let side = self.level.m + 2;
        let m = self.level.m;
        let h2 = self.level.h * self.level.h;
        let mut full = vec![0.0; side * side];
        for r in 0..side - 1 {
            for c in 0..side - 1 {
                let idx = Self::corners(side, r, c);
                let v = [u[idx[0]], u[idx[1]], u[idx[2]], u[idx[3]]];
                let (_, local) = self.density(&v);
                for (slot, g) in idx.iter().zip(local) {
                    full[*slot] += h2 * g;
                }
            }
        }
        for row in 0..m {
            let start = (row + 1) * side + 1;
            grad[row * m..(row + 1) * m].copy_from_slice(&full[start..start + m]);
        }
        for (g, &f) in grad.iter_mut().zip(&self.frozen) {
            if f {
                *g = 0.0;
            }
        }
    }

    /// Integrand mean `√(1 + σ²‖∇u‖²)` over one element and its derivative
    /// with respect to the four corner values.
    fn density(&self, v: &[f64; 4]) -> (f64, [f64; 4]) {
        let h = self.level.h;
        let sigma = self.sigma;
        match self.quadrature {
            SurfaceQuadrature::ElementStiffness => {
                let [a, b, c, d] = *v;
                // K u for the bilinear element stiffness matrix
                let ku = [
                    (2.0 * a - 0.5 * (b + d) - c) / 3.0,
                    (2.0 * b - 0.5 * (a + c) - d) / 3.0,
                    (2.0 * c - 0.5 * (b + d) - a) / 3.0,
                    (2.0 * d - 0.5 * (a + c) - b) / 3.0,
                ];
                let quad = a * ku[0] + b * ku[1] + c * ku[2] + d * ku[3];
                let c = sigma * sigma / (h * h);
                let root = (1.0 + quad * c).sqrt();
                let scale = c / root;
                (root, ku.map(|k| k * scale))
            }
            SurfaceQuadrature::Centroid => {
                let [a, b, c, d] = *v;
                let gx = sigma * (b - a + c - d) / (2.0 * h);
                let gy = sigma * (d - a + c - b) / (2.0 * h);
                let root = (1.0 + gx * gx + gy * gy).sqrt();
                let s = sigma / (2.0 * h * root);
                (
                    root,
                    [
                        s * (-gx - gy),
                        s * (gx - gy),
                        s * (gx + gy),
                        s * (-gx + gy),
                    ],
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_surface_has_unit_area() {
        for q in [SurfaceQuadrature::ElementStiffness, SurfaceQuadrature::Centroid] {
            let t = SurfaceTerm::new(GridLevel::new(3), |_, _| 0.0, q);
            let x = vec![0.0; t.level.n];
            assert!((t.value(&x) - 1.0).abs() < 1e-13);
            let mut g = vec![1.0; t.level.n];
            t.gradient_into(&x, &mut g);
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unscaled_form_is_area_of_scaled_field() {
        let level = GridLevel::new(2);
        let h = level.h;
        let x = level.sample(|a, b| (3.0 * a).sin() * b);
        let xs: Vec<f64> = x.iter().map(|v| v * h).collect();
        for q in [SurfaceQuadrature::ElementStiffness, SurfaceQuadrature::Centroid] {
            let bnd = |a: f64, b: f64| a - b * b;
            let t = SurfaceTerm::new(level, bnd, q).with_form(SurfaceForm::Unscaled);
            let plain = SurfaceTerm::new(level, move |a, b| h * bnd(a, b), q);
            assert!((t.value(&x) - plain.value(&xs)).abs() < 1e-13);
            let (mut g, mut gs) = (vec![0.0; level.n], vec![0.0; level.n]);
            t.gradient_into(&x, &mut g);
            plain.gradient_into(&xs, &mut gs);
            for (a, b) in g.iter().zip(&gs) {
                assert!((a - h * b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn tilted_plane_area() {
        // u = x₁ has ‖∇u‖ = 1 on every element under either quadrature
        for q in [SurfaceQuadrature::ElementStiffness, SurfaceQuadrature::Centroid] {
            let level = GridLevel::new(2);
            let t = SurfaceTerm::new(level, |x1, _| x1, q);
            let x = level.sample(|x1, _| x1);
            assert!((t.value(&x) - 2f64.sqrt()).abs() < 1e-13);
        }
    }
}
