//! The four benchmark families, assembled on every level of a hierarchy.
//!
//! Every family lives on the unit square with bilinear elements. Nonlinear
//! pointwise terms use lumped (nodal) quadrature with weight `h²`; loads are
//! lumped the same way. Level objectives are stored in finite-element units
//! and carry a normalisation factor `1/h²` that the solvers see; with it the
//! full-weighting restriction `¼ Pᵀ` is consistent between the Galerkin and
//! the rediscretised coarse operators.

mod bounds;
mod level;
mod surface;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use bounds::{detect_active, ActiveSetMask, Activity, BoundSet};
pub use level::{LevelObjective, NodalKind, NodalTerm};
pub use surface::{SurfaceForm, SurfaceQuadrature, SurfaceTerm};

use crate::error::{check_len, Error, Result};
use crate::hierarchy::{GridHierarchy, GridLevel};
use crate::objective::{EvalCounts, Objective};
use crate::sparse::CsrMatrix;

/// 4×4 stiffness matrix of `∫ ∇u·∇v` on a square bilinear element, corners
/// counter-clockwise from bottom-left. Independent of `h`.
pub const ELEMENT_STIFFNESS: [[f64; 4]; 4] = [
    [2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0, -1.0 / 6.0],
    [-1.0 / 6.0, 2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0],
    [-1.0 / 3.0, -1.0 / 6.0, 2.0 / 3.0, -1.0 / 6.0],
    [-1.0 / 6.0, -1.0 / 3.0, -1.0 / 6.0, 2.0 / 3.0],
];

/// Interior-node stiffness matrix of `-Δ` with homogeneous Dirichlet data,
/// assembled element by element.
pub fn assemble_laplacian(level: &GridLevel) -> (CsrMatrix, [[f64; 4]; 4]) {
    let m = level.m;
    let side = m + 2;
    // full-grid index -> interior index
    let interior = |r: usize, c: usize| -> Option<usize> {
        (r >= 1 && c >= 1 && r <= m && c <= m).then(|| level.node(r - 1, c - 1))
    };
    let mut triplets = Vec::with_capacity(16 * (m + 1) * (m + 1));
    for r in 0..side - 1 {
        for c in 0..side - 1 {
            let corners = [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)];
            let ids = corners.map(|(rr, cc)| interior(rr, cc));
            for a in 0..4 {
                let Some(i) = ids[a] else { continue };
                for b in 0..4 {
                    if let Some(j) = ids[b] {
                        triplets.push((i, j, ELEMENT_STIFFNESS[a][b]));
                    }
                }
            }
        }
    }
    (
        CsrMatrix::from_triplets(level.n, level.n, &triplets),
        ELEMENT_STIFFNESS,
    )
}

/// Galerkin coarse operator `¼ Pᵀ Q P` for the transfer into level `k`.
pub fn galerkin_coarse(q_fine: &CsrMatrix, hier: &GridHierarchy, k: usize) -> Result<CsrMatrix> {
    if k == 0 || k > hier.finest() {
        return Err(Error::InvalidLevel(k as i64));
    }
    check_len(hier.level(k).n, q_fine.nrows())?;
    let qp = q_fine.matmul(hier.prolongation(k))?;
    let mut coarse = hier.prolongation_transpose(k).matmul(&qp)?;
    coarse.scale(0.25);
    Ok(coarse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Quadratic obstacle problem with a spiral-shaped obstacle.
    Spiral,
    /// Obstacle problem with an exponential nonlinearity and two-sided bounds.
    #[serde(rename = "nonquad")]
    Nonquadratic,
    /// Minimal surface over a parabolic obstacle.
    #[serde(rename = "minsurf")]
    MinimalSurface,
    /// Cubic nonlinearity with a single equality constraint on the mean.
    Equality,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Spiral,
        Family::Nonquadratic,
        Family::MinimalSurface,
        Family::Equality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Spiral => "spiral",
            Family::Nonquadratic => "nonquad",
            Family::MinimalSurface => "minsurf",
            Family::Equality => "equality",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem `{s}`")))
    }
}

/// Spiral obstacle, posed on `(-1, 1)²` and mapped to the unit square.
pub fn spiral_obstacle(x1: f64, x2: f64) -> f64 {
    let (a, b) = (2.0 * x1 - 1.0, 2.0 * x2 - 1.0);
    let r = a.hypot(b);
    if r == 0.0 {
        return 3.6;
    }
    let theta = b.atan2(a);
    (2.0 * PI / r + PI / 2.0 - theta).sin() + r * (r + 1.0) / (r - 2.0) - 3.0 * r + 3.6
}

pub fn nonquad_obstacle(x1: f64, x2: f64) -> f64 {
    let d1 = x1 - 7.0 / 16.0;
    let d2 = x2 - 7.0 / 16.0;
    -8.0 * d1 * d1 - 8.0 * d2 * d2 + 0.2
}

/// Right-hand side of the exponential obstacle problem, transcribed as given
/// (including `sin(3π x₁)` in the outer factor).
pub fn nonquad_source(x1: f64, x2: f64) -> f64 {
    let p = x1 * x1 - x1 * x1 * x1;
    (9.0 * PI * PI + (p * (3.0 * PI * x2).sin()).exp() * p + 6.0 * x1 - 2.0) * (3.0 * PI * x1).sin()
}

pub fn minsurf_obstacle(x1: f64, x2: f64) -> f64 {
    -8.0 * (x1 - 0.5).powi(2) - 8.0 * (x2 - 0.5).powi(2) + 0.55
}

/// Boundary data of the minimal surface: `ω = -sin(2πξ)` on the bottom and
/// left edges, `-ω` on the right and top, with `ξ` the edge coordinate.
pub fn minsurf_boundary(x1: f64, x2: f64) -> f64 {
    let omega = |xi: f64| -(2.0 * PI * xi).sin();
    if x2 == 0.0 {
        omega(x1)
    } else if x1 == 1.0 {
        -omega(x2)
    } else if x2 == 1.0 {
        -omega(x1)
    } else if x1 == 0.0 {
        omega(x2)
    } else {
        0.0
    }
}

pub fn equality_obstacle(x1: f64, x2: f64) -> f64 {
    -32.0 * (x1 - 0.5).powi(2) - 32.0 * (x2 - 0.5).powi(2) + 2.5
}

/// Data of one level.
#[derive(Debug, Clone)]
pub struct ProblemLevel {
    pub objective: LevelObjective,
    pub bounds: BoundSet,
    /// Target `γ` of `Σ xᵢ = γ`, when the family has the equality constraint.
    pub equality: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProblemOptions {
    pub surface_quadrature: SurfaceQuadrature,
    pub surface_form: SurfaceForm,
}

/// A benchmark family discretised on every level of a hierarchy.
#[derive(Debug, Clone)]
pub struct Problem {
    family: Family,
    hierarchy: Arc<GridHierarchy>,
    levels: Vec<ProblemLevel>,
}

impl Problem {
    pub fn new(family: Family, hierarchy: Arc<GridHierarchy>) -> Result<Self> {
        Self::with_options(family, hierarchy, ProblemOptions::default())
    }

    pub fn with_options(
        family: Family,
        hierarchy: Arc<GridHierarchy>,
        options: ProblemOptions,
    ) -> Result<Self> {
        let levels = hierarchy
            .levels()
            .iter()
            .map(|level| build_level(family, level, options))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            family,
            hierarchy,
            levels,
        })
    }

    /// Assembles a problem from caller-supplied level data, coarsest first.
    /// The family tag is only used for reporting.
    pub fn from_levels(family: Family, hierarchy: Arc<GridHierarchy>, levels: Vec<ProblemLevel>) -> Result<Self> {
        if levels.len() != hierarchy.levels().len() {
            return Err(Error::InvalidLevel(levels.len() as i64 - 1));
        }
        for (data, level) in levels.iter().zip(hierarchy.levels()) {
            check_len(level.n, data.objective.dim())?;
            check_len(level.n, data.bounds.len())?;
        }
        Ok(Self {
            family,
            hierarchy,
            levels,
        })
    }

    /// Convenience: builds the hierarchy `0..=finest` and the family on it.
    pub fn build(family: Family, finest: usize) -> Result<Self> {
        Self::build_with(family, finest, ProblemOptions::default())
    }

    pub fn build_with(family: Family, finest: usize, options: ProblemOptions) -> Result<Self> {
        let hier = crate::hierarchy::build_hierarchy(finest as i64)?;
        Self::with_options(family, Arc::new(hier), options)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn hierarchy(&self) -> &GridHierarchy {
        &self.hierarchy
    }

    pub fn shared_hierarchy(&self) -> Arc<GridHierarchy> {
        Arc::clone(&self.hierarchy)
    }

    pub fn finest(&self) -> usize {
        self.hierarchy.finest()
    }

    pub fn level(&self, k: usize) -> &ProblemLevel {
        &self.levels[k]
    }

    pub fn has_equality(&self) -> bool {
        self.levels[self.finest()].equality.is_some()
    }

    fn check_input(&self, k: usize, x: &[f64]) -> Result<()> {
        if k > self.finest() {
            return Err(Error::InvalidLevel(k as i64));
        }
        check_len(self.levels[k].objective.dim(), x.len())?;
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// `f_k(x)` in finite-element units; counts one function call on level `k`.
    pub fn objective(&self, k: usize, x: &[f64], counts: &EvalCounts) -> Result<f64> {
        self.check_input(k, x)?;
        counts.level(k).bump_value();
        Ok(self.levels[k].objective.raw_value(x))
    }

    /// `∇f_k(x)` in finite-element units; counts one gradient call on level `k`.
    pub fn gradient(&self, k: usize, x: &[f64], counts: &EvalCounts) -> Result<Vec<f64>> {
        self.check_input(k, x)?;
        counts.level(k).bump_gradient();
        let mut g = vec![0.0; x.len()];
        self.levels[k].objective.raw_gradient_into(x, &mut g);
        Ok(g)
    }

    /// Truncated view of the finest-level objective for the given active set.
    pub fn truncate(&self, mask: &ActiveSetMask) -> Result<LevelObjective> {
        self.levels[self.finest()].objective.truncate(&mask.active())
    }
}

fn build_level(family: Family, level: &GridLevel, options: ProblemOptions) -> Result<ProblemLevel> {
    let n = level.n;
    let h2 = level.h * level.h;
    let base = LevelObjective::new(n).with_scale(1.0 / h2);
    let infinite = vec![f64::INFINITY; n];
    let lumped = vec![h2; n];
    let out = match family {
        Family::Spiral => ProblemLevel {
            objective: base.with_stiffness(assemble_laplacian(level).0),
            bounds: BoundSet::new(level.sample(spiral_obstacle), infinite)?,
            equality: None,
        },
        Family::Nonquadratic => {
            let load = level.sample(|a, b| h2 * nonquad_source(a, b));
            ProblemLevel {
                objective: base
                    .with_stiffness(assemble_laplacian(level).0)
                    .with_load(load)
                    .with_nodal(NodalKind::NegExpEnergy, lumped),
                bounds: BoundSet::new(level.sample(nonquad_obstacle), vec![0.5; n])?,
                equality: None,
            }
        }
        Family::MinimalSurface => ProblemLevel {
            objective: base.with_surface(SurfaceTerm::new(
                *level,
                minsurf_boundary,
                options.surface_quadrature,
            )
            .with_form(options.surface_form)),
            bounds: BoundSet::new(level.sample(minsurf_obstacle), infinite)?,
            equality: None,
        },
        Family::Equality => ProblemLevel {
            objective: base
                .with_stiffness(assemble_laplacian(level).0)
                .with_nodal(NodalKind::NegCubic, lumped),
            bounds: BoundSet::new(level.sample(equality_obstacle), infinite)?,
            equality: Some(1.0 / h2),
        },
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_hierarchy;

    fn center(level: &GridLevel) -> usize {
        level.node(level.m / 2, level.m / 2)
    }

    #[test]
    fn laplacian_level_zero() {
        let (q, _) = assemble_laplacian(&GridLevel::new(0));
        assert_eq!(q.to_dense(), vec![vec![8.0 / 3.0]]);
    }

    #[test]
    fn laplacian_rows_and_symmetry() {
        let level = GridLevel::new(3);
        let (q, _) = assemble_laplacian(&level);
        assert_eq!(q.asymmetry(), 0.0);
        let ones = vec![1.0; level.n];
        let qo = q.mul_vec(&ones).unwrap();
        let i = level.node(4, 5);
        assert!(qo[i].abs() < 1e-15);
        // next to the boundary the eliminated neighbours show up
        assert!(qo[level.node(0, 4)] > 0.0);
    }

    #[test]
    fn galerkin_of_identity() {
        let hier = build_hierarchy(3).unwrap();
        let eye = CsrMatrix::identity(hier.level(3).n);
        let c = galerkin_coarse(&eye, &hier, 3).unwrap();
        // ¼ Σ stencil² = ¼ (1 + 4·¼ + 4·1/16)
        for i in 0..hier.level(2).n {
            assert!((c.get(i, i) - 0.5625).abs() < 1e-15);
        }
        assert_eq!(c.asymmetry(), 0.0);
    }

    #[test]
    fn galerkin_of_laplacian_is_quarter_coarse_laplacian() {
        let hier = build_hierarchy(3).unwrap();
        for k in 1..=3 {
            let (qf, _) = assemble_laplacian(hier.level(k));
            let (qc, _) = assemble_laplacian(hier.level(k - 1));
            let g = galerkin_coarse(&qf, &hier, k).unwrap();
            let (gd, cd) = (g.to_dense(), qc.to_dense());
            for i in 0..gd.len() {
                for j in 0..gd.len() {
                    assert!((gd[i][j] - 0.25 * cd[i][j]).abs() < 1e-14, "k={k} ({i},{j})");
                }
            }
        }
        // level pair (1, 0): both are 1×1
        let g = galerkin_coarse(&assemble_laplacian(hier.level(1)).0, &hier, 1).unwrap();
        assert!((g.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spiral_data() {
        let p = Problem::build(Family::Spiral, 3).unwrap();
        let lvl = p.hierarchy().level(3);
        let data = p.level(3);
        assert_eq!(data.bounds.lower[center(lvl)], 3.6);
        assert!(data.bounds.upper.iter().all(|v| *v == f64::INFINITY));
        assert!(data.objective.load().is_none());
        assert!(data.objective.is_quadratic());
    }

    #[test]
    fn nonquad_data() {
        let p = Problem::build(Family::Nonquadratic, 4).unwrap();
        assert!(p.level(4).bounds.upper.iter().all(|&v| v == 0.5));
        assert!((nonquad_obstacle(7.0 / 16.0, 7.0 / 16.0) - 0.2).abs() < 1e-15);
        // the node (7/16, 7/16) exists on level 4 (h = 1/32)
        let lvl = p.hierarchy().level(4);
        let i = lvl.node(13, 13);
        assert_eq!(lvl.coords(i), (14.0 / 32.0, 14.0 / 32.0));
        assert!((p.level(4).bounds.lower[i] - 0.2).abs() < 1e-15);
        // gradient of the nodal term vanishes at u = 0
        assert_eq!(NodalKind::NegExpEnergy.derivative_at(0.0), 0.0);
    }

    #[test]
    fn minsurf_data() {
        let p = Problem::build(Family::MinimalSurface, 3).unwrap();
        let lvl = p.hierarchy().level(3);
        assert!((p.level(3).bounds.lower[center(lvl)] - 0.55).abs() < 1e-15);
        assert_eq!(minsurf_boundary(0.0, 0.0), 0.0);
        assert!((-(2.0 * PI * 0.0f64).sin()).abs() == 0.0);
        assert!((minsurf_boundary(0.25, 0.0) + 1.0).abs() < 1e-15);
        assert!((minsurf_boundary(1.0, 0.25) - 1.0).abs() < 1e-15);
        assert!((minsurf_boundary(0.25, 1.0) - 1.0).abs() < 1e-15);
        assert!((minsurf_boundary(0.0, 0.25) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_minsurf_with_zero_boundary() {
        let level = GridLevel::new(2);
        let obj = LevelObjective::new(level.n).with_surface(SurfaceTerm::new(
            level,
            |_, _| 0.0,
            SurfaceQuadrature::default(),
        ));
        let x = vec![0.0; level.n];
        assert!((obj.raw_value(&x) - 1.0).abs() < 1e-14);
        assert!(obj.gradient(&x).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn equality_data() {
        let p = Problem::build(Family::Equality, 4).unwrap();
        let lvl = p.hierarchy().level(4);
        assert!((p.level(4).bounds.lower[center(lvl)] - 2.5).abs() < 1e-15);
        assert_eq!(p.level(4).equality, Some(1024.0));
        // constant field on the constraint: h²·n·c = 1
        let c = 1024.0 / lvl.n as f64;
        let sum: f64 = vec![c; lvl.n].iter().sum::<f64>() * lvl.h * lvl.h;
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_at_zero_and_counters() {
        let p = Problem::build(Family::Nonquadratic, 2).unwrap();
        let counts = EvalCounts::new(3);
        let x = vec![0.0; p.hierarchy().level(2).n];
        let g = p.gradient(2, &x, &counts).unwrap();
        let load = p.level(2).objective.load().unwrap();
        for (gi, qi) in g.iter().zip(load) {
            assert!((gi + qi).abs() < 1e-15);
        }
        p.objective(2, &x, &counts).unwrap();
        p.objective(1, &[0.0; 9], &counts).unwrap();
        assert_eq!(counts.level(2).gradients(), 1);
        assert_eq!(counts.level(2).values(), 1);
        assert_eq!(counts.level(1).values(), 1);
        assert_eq!(counts.level(0).total(), 0);

        let mut bad = x.clone();
        bad[3] = f64::NAN;
        assert!(matches!(p.objective(2, &bad, &counts), Err(Error::NonFinite(3))));
        assert!(p.objective(2, &x[1..], &counts).is_err());
    }

    #[test]
    fn truncation_rules() {
        let q = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let obj = LevelObjective::new(2).with_stiffness(q).with_load(vec![1.0, 1.0]);
        let t = obj.truncate(&[true, false]).unwrap();
        assert_eq!(t.stiffness().unwrap().to_dense(), vec![vec![0.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(t.load().unwrap(), &[0.0, 1.0]);

        let same = obj.truncate(&[false, false]).unwrap();
        assert_eq!(same.stiffness(), obj.stiffness());
        let all = obj.truncate(&[true, true]).unwrap();
        assert_eq!(all.stiffness().unwrap().nnz(), 0);
        assert_eq!(all.raw_value(&[3.0, -4.0]), 0.0);
    }

    #[test]
    fn truncation_is_idempotent() {
        let p = Problem::build(Family::Nonquadratic, 3).unwrap();
        let n = p.hierarchy().level(3).n;
        let mask: Vec<bool> = (0..n).map(|i| i % 7 == 0).collect();
        let once = p.level(3).objective.truncate(&mask).unwrap();
        let twice = once.truncate(&mask).unwrap();
        assert_eq!(once.stiffness(), twice.stiffness());
        assert_eq!(once.load(), twice.load());
        assert_eq!(once.nodal().unwrap().weights, twice.nodal().unwrap().weights);

        let s = Problem::build(Family::MinimalSurface, 3).unwrap();
        let once = s.level(3).objective.truncate(&mask).unwrap();
        let twice = once.truncate(&mask).unwrap();
        assert_eq!(once.surface().unwrap().frozen(), twice.surface().unwrap().frozen());
    }

    #[test]
    fn family_names_roundtrip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("bogus".parse::<Family>().is_err());
    }
}
