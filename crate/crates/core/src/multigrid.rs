//! V-cycles for bound-constrained problems on a grid hierarchy.
//!
//! Three variants share one driver:
//!
//! * [`Variant::CsTruncated`]: correction scheme for quadratics. Active finest
//!   nodes are removed from the coarse space, coarse matrices are Galerkin
//!   products of the truncated finest matrix, and coarse bounds come from
//!   neighbourhood max/min restrictions.
//! * [`Variant::FasTruncated`]: full approximation scheme with the same
//!   truncation of the finest gradient, bounds and prolongation.
//! * [`Variant::FasPlain`]: full approximation scheme without truncation.
//!   Coarse bounds use the guarded restrictions, which keep every corrected
//!   iterate feasible, and a global constraint `Σ xᵢ = γ` is carried to the
//!   coarse levels through `γ_{k-1} = Σ (R x)ᵢ`.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{asymptotic_rate, RateEstimate};
use crate::hierarchy::GridHierarchy;
use crate::error::{check_len, Error, Result};
use crate::objective::{distance, norm, Counted, EvalCounts, Objective, Quadratic, ShiftedObjective};
use crate::problems::{galerkin_coarse, ActiveSetMask, BoundSet, Problem};
use crate::smoothers::{
    armijo_pg_solve, gp_solve, kkt_residual, kkt_residual_with_sum, pgs_solve, pgs_sweep,
    project_box, SmootherConfig, StepState,
};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    CsTruncated,
    FasTruncated,
    FasPlain,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::CsTruncated, Variant::FasTruncated, Variant::FasPlain];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CsTruncated => "cs-truncated",
            Variant::FasTruncated => "fas-truncated",
            Variant::FasPlain => "fas-plain",
        }
    }

    pub fn is_truncated(self) -> bool {
        self != Variant::FasPlain
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Smoother used on every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    /// Gradient projection with the gradient-based line search (Armijo
    /// projected gradient when an equality constraint is present).
    Gp,
    /// Projected Gauss-Seidel; quadratic problems only.
    Gsp,
}

impl SmootherKind {
    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Gp => "gp",
            SmootherKind::Gsp => "gsp",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(SmootherKind::Gp),
            "gsp" => Ok(SmootherKind::Gsp),
            _ => Err(Error::Config(format!("unknown smoother `{s}`"))),
        }
    }
}

/// Coarse objectives of the full approximation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseModel {
    /// [`CoarseModel::Galerkin`] for truncated cycles, otherwise
    /// [`CoarseModel::Rediscretized`].
    #[default]
    Auto,
    /// The family rediscretised on each coarse mesh.
    Rediscretized,
    /// Coarse objectives inherited from the finest one: Galerkin products of
    /// the (truncated) finest matrix for quadratics, and otherwise
    /// `f_{k-1}(y) = ¼ f_k(x_k + T P (y - R x_k))` with `T` the truncation.
    Galerkin,
}

impl CoarseModel {
    pub fn resolve(self, variant: Variant) -> CoarseModel {
        match (self, variant) {
            (CoarseModel::Auto, Variant::FasPlain) => CoarseModel::Rediscretized,
            (CoarseModel::Auto, _) => CoarseModel::Galerkin,
            (m, _) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VCycleConfig {
    pub variant: Variant,
    pub smoother: SmootherKind,
    /// Pre-smoothing steps `ν₁`.
    pub pre: usize,
    /// Post-smoothing steps `ν₂`.
    pub post: usize,
    /// Smoother tolerance on levels above the coarsest.
    pub tolerance: f64,
    /// Coarsest-level tolerance `ε₀`.
    pub coarse_tolerance: f64,
    /// Coarsest-level iteration cap `ν₀`.
    pub coarse_max_iter: usize,
    /// Outer V-cycle cap.
    pub max_cycles: usize,
    /// Stop when `‖x_t - x_{t-1}‖` is at most this (no reference given).
    pub step_tolerance: f64,
    /// Stop when `‖x_t - x*‖ ≤ error_tolerance · ‖x*‖` (reference given).
    pub error_tolerance: f64,
    pub coarse_model: CoarseModel,
    /// First trial step of the line search.
    pub initial_step: f64,
    /// Step growth factor `c`.
    pub growth: f64,
    /// Carry the accepted step between smoother calls on a level.
    pub warm_start: bool,
}

impl Default for VCycleConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FasPlain,
            smoother: SmootherKind::Gp,
            pre: 1,
            post: 1,
            tolerance: 1e-9,
            coarse_tolerance: 1e-9,
            coarse_max_iter: 10_000,
            max_cycles: 100,
            step_tolerance: 1e-9,
            error_tolerance: 1e-8,
            coarse_model: CoarseModel::Auto,
            initial_step: 1.0,
            growth: 2.0,
            warm_start: true,
        }
    }
}

impl VCycleConfig {
    /// `(ν, ν)` cycle of the given variant with the GP smoother.
    pub fn gp(variant: Variant, nu: usize) -> Self {
        Self {
            variant,
            pre: nu,
            post: nu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre + self.post == 0 {
            return Err(Error::Config("at least one smoothing step is required".into()));
        }
        if !(self.coarse_tolerance <= self.tolerance) {
            return Err(Error::Config("coarse tolerance must not exceed the smoother tolerance".into()));
        }
        if !(self.growth > 1.0) || !(self.initial_step > 0.0) {
            return Err(Error::Config("line search needs growth > 1 and a positive initial step".into()));
        }
        Ok(())
    }
}

/// Per-level evaluation counts of one solve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEvals {
    pub values: u64,
    pub gradients: u64,
}

impl LevelEvals {
    pub fn total(&self) -> u64 {
        self.values + self.gradients
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Final finest iterate.
    pub x: Vec<f64>,
    pub cycles: usize,
    /// `‖x_t - x*‖` for `t = 0..=cycles`, when a reference was supplied.
    pub errors: Vec<f64>,
    /// `‖x_t - x_{t-1}‖` for `t = 1..=cycles`.
    pub steps: Vec<f64>,
    /// `|Σ x_t - γ| / |γ|` for `t = 1..=cycles` (equality problems only).
    pub equality_residuals: Vec<f64>,
    /// Every finest iterate after a cycle satisfied the bounds.
    pub feasible: bool,
    /// Indexed by level, coarsest first.
    pub evals: Vec<LevelEvals>,
    pub rate: Option<RateEstimate>,
    pub converged: bool,
}

impl SolveReport {
    /// Function plus gradient calls on the finest level.
    pub fn finest_evals(&self) -> u64 {
        self.evals.last().map_or(0, LevelEvals::total)
    }

    pub fn total_evals(&self) -> u64 {
        self.evals.iter().map(LevelEvals::total).sum()
    }
}

/// `γ_{k-1} = Σᵢ (R x)ᵢ` for the transfer from level `k`.
pub fn restrict_equality_target(problem: &Problem, k: usize, x: &[f64]) -> Result<f64> {
    Ok(problem.hierarchy().restrict(k, x)?.iter().sum())
}

/// Multigrid state of one solve: evaluation counters and the line-search
/// step of every level.
pub struct MultigridSolver<'a> {
    problem: &'a Problem,
    config: VCycleConfig,
    counts: EvalCounts,
    steps: Vec<StepState>,
    /// `Q·scale`, `load·scale` per level for quadratic families.
    quadratics: Option<Vec<Quadratic>>,
    coarse_model: CoarseModel,
}

fn mismatch(variant: impl fmt::Display, problem: &Problem, reason: &'static str) -> Error {
    Error::VariantMismatch {
        variant: variant.to_string(),
        problem: problem.family().to_string(),
        reason,
    }
}

impl<'a> MultigridSolver<'a> {
    pub fn new(problem: &'a Problem, config: VCycleConfig) -> Result<Self> {
        config.validate()?;
        let quadratic = (0..=problem.finest()).all(|k| problem.level(k).objective.is_quadratic());
        let equality = problem.has_equality();
        match config.variant {
            Variant::CsTruncated if !quadratic => {
                return Err(mismatch(config.variant, problem, "the correction scheme needs a quadratic objective"))
            }
            Variant::CsTruncated | Variant::FasTruncated if equality => {
                return Err(mismatch(config.variant, problem, "truncation is incompatible with the equality constraint"))
            }
            _ => {}
        }
        if config.smoother == SmootherKind::Gsp && (!quadratic || equality) {
            return Err(mismatch("gsp", problem, "projected Gauss-Seidel needs a box-constrained quadratic"));
        }
        let quadratics = quadratic.then(|| {
            (0..=problem.finest())
                .map(|k| scaled_quadratic(&problem.level(k).objective))
                .collect()
        });
        let step = if config.warm_start {
            StepState::new(config.initial_step)
        } else {
            StepState::cold(config.initial_step)
        };
        Ok(Self {
            problem,
            config,
            counts: EvalCounts::new(problem.finest() + 1),
            steps: vec![step; problem.finest() + 1],
            quadratics,
            coarse_model: config.coarse_model.resolve(config.variant),
        })
    }

    pub fn config(&self) -> &VCycleConfig {
        &self.config
    }

    pub fn counts(&self) -> &EvalCounts {
        &self.counts
    }

    pub fn level_evals(&self) -> Vec<LevelEvals> {
        (0..self.counts.len())
            .map(|k| LevelEvals {
                values: self.counts.level(k).values(),
                gradients: self.counts.level(k).gradients(),
            })
            .collect()
    }

    /// One V-cycle of the configured variant on the finest level.
    pub fn cycle(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        match self.config.variant {
            Variant::CsTruncated => self.cycle_cs_truncated(x),
            Variant::FasTruncated => self.cycle_fas_truncated(x),
            Variant::FasPlain => self.cycle_fas_plain(x),
        }
    }

    fn check_start(&self, x: &[f64]) -> Result<usize> {
        let j = self.problem.finest();
        check_len(self.problem.hierarchy().level(j).n, x.len())?;
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(j),
        }
    }

    /// Truncated correction-scheme cycle.
    pub fn cycle_cs_truncated(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let j = self.check_start(x)?;
        let Some(quads) = self.quadratics.as_ref() else {
            return Err(mismatch(Variant::CsTruncated, self.problem, "the correction scheme needs a quadratic objective"));
        };
        let fine = quads[j].clone();
        let bounds = self.problem.level(j).bounds.clone();
        self.cs_level(j, x.to_vec(), &fine, &bounds, None)
    }

    /// Truncated full-approximation-scheme cycle.
    pub fn cycle_fas_truncated(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let j = self.check_start(x)?;
        if self.problem.has_equality() {
            return Err(mismatch(Variant::FasTruncated, self.problem, "truncation is incompatible with the equality constraint"));
        }
        let bounds = self.problem.level(j).bounds.clone();
        let shift = vec![0.0; x.len()];
        self.fas_level(j, x.to_vec(), &shift, &bounds, None, true, Model::Native)
    }

    /// Full-approximation-scheme cycle without truncation.
    pub fn cycle_fas_plain(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let j = self.check_start(x)?;
        let bounds = self.problem.level(j).bounds.clone();
        let target = self.problem.level(j).equality;
        let shift = vec![0.0; x.len()];
        self.fas_level(j, x.to_vec(), &shift, &bounds, target, false, Model::Native)
    }

    /// Runs the smoother on level `k`.
    #[allow(clippy::too_many_arguments)]
    fn smooth(
        &mut self,
        k: usize,
        f: &dyn Objective,
        quad: Option<&Quadratic>,
        bounds: &BoundSet,
        target: Option<f64>,
        x: Vec<f64>,
        steps: usize,
    ) -> Result<Vec<f64>> {
        let coarsest = k == 0;
        let cfg = if coarsest {
            SmootherConfig {
                tolerance: self.config.coarse_tolerance,
                max_iter: self.config.coarse_max_iter,
                growth: self.config.growth,
            }
        } else {
            SmootherConfig {
                tolerance: self.config.tolerance,
                max_iter: steps,
                growth: self.config.growth,
            }
        };
        if cfg.max_iter == 0 {
            return Ok(x);
        }
        if self.config.smoother == SmootherKind::Gsp {
            let q = quad.expect("quadratic data for projected Gauss-Seidel");
            if coarsest {
                return Ok(pgs_solve(&q.matrix, &q.linear, bounds, &x, &cfg)?.x);
            }
            let mut x = project_box(&x, bounds);
            for _ in 0..steps {
                pgs_sweep(&q.matrix, &q.linear, bounds, &mut x)?;
            }
            return Ok(x);
        }
        let counted = Counted::new(f, self.counts.level(k));
        let report = match target {
            Some(gamma) => armijo_pg_solve(&counted, bounds, gamma, &x, &cfg, &mut self.steps[k])?,
            None => gp_solve(&counted, bounds, &x, &cfg, &mut self.steps[k])?,
        };
        Ok(report.x)
    }

    /// Correction-scheme recursion. `galerkin` holds the coarse matrices of
    /// the current cycle, built once from the truncated finest matrix.
    fn cs_level(
        &mut self,
        k: usize,
        x: Vec<f64>,
        quad: &Quadratic,
        bounds: &BoundSet,
        galerkin: Option<&[CsrMatrix]>,
    ) -> Result<Vec<f64>> {
        let (pre, post) = (self.config.pre, self.config.post);
        if k == 0 {
            return self.smooth(0, quad, Some(quad), bounds, None, x, 0);
        }
        let hier = self.problem.shared_hierarchy();
        let x = self.smooth(k, quad, Some(quad), bounds, None, x, pre)?;

        let mut residual = quad.matrix.mul_vec(&x)?;
        residual.iter_mut().zip(&quad.linear).for_each(|(r, b)| *r = b - *r);
        let (mut lo_hat, mut up_hat) = shifted_bounds(bounds, &x);

        let finest = galerkin.is_none();
        let mut mask = None;
        let owned;
        let galerkin = match galerkin {
            Some(g) => g,
            None => {
                let active = ActiveSetMask::classify(&x, bounds);
                let drop = active.active();
                let truncated = quad.matrix.without_rows_cols(&drop)?;
                zero_where(&mut residual, &drop);
                truncate_bounds(&mut lo_hat, &mut up_hat, &active);
                owned = galerkin_chain(truncated, &hier, k)?;
                mask = Some(drop);
                &owned[..]
            }
        };
        let _ = finest;

        let coarse_quad = Quadratic::new(galerkin[k - 1].clone(), hier.restrict_unchecked(k, &residual));
        let coarse_bounds = BoundSet {
            lower: hier.neighborhoods(k).max_of(&lo_hat),
            upper: hier.neighborhoods(k).min_of(&up_hat),
        };
        let zero = vec![0.0; coarse_quad.dim()];
        let v = self.cs_level(k - 1, zero, &coarse_quad, &coarse_bounds, Some(galerkin))?;

        let mut x = x;
        add_correction(&hier, k, &v, &mut x, mask.as_deref());
        self.smooth(k, quad, Some(quad), bounds, None, x, post)
    }

    /// Full-approximation-scheme recursion on level `k` for
    /// `min f_k(x) - shiftᵀx` over `bounds` (and `Σx = target`).
    #[allow(clippy::too_many_arguments)]
    fn fas_level(
        &mut self,
        k: usize,
        x: Vec<f64>,
        shift: &[f64],
        bounds: &BoundSet,
        target: Option<f64>,
        truncated: bool,
        model: Model<'_>,
    ) -> Result<Vec<f64>> {
        let problem = self.problem;
        let j = problem.finest();
        let hier = problem.shared_hierarchy();
        let (pre, post) = (self.config.pre, self.config.post);

        // objective of this level, plus quadratic data for Gauss-Seidel
        let base_quad: Option<Quadratic> = match model {
            Model::Matrices(g) => Some(Quadratic::new(g[k].clone(), vec![0.0; shift.len()])),
            Model::Composed(_) => None,
            Model::Native => self.quadratics.as_ref().map(|q| q[k].clone()),
        };
        let composed;
        let base: &dyn Objective = match (&model, &base_quad) {
            (Model::Composed(links), _) => {
                composed = Composed {
                    finest: &problem.level(j).objective,
                    hier: &hier,
                    links,
                    dim: shift.len(),
                };
                &composed
            }
            (Model::Matrices(_), Some(q)) => q,
            _ => &problem.level(k).objective,
        };
        let shifted_quad = base_quad.as_ref().map(|q| {
            let linear = q.linear.iter().zip(shift).map(|(a, b)| a + b).collect();
            Quadratic::new(q.matrix.clone(), linear)
        });
        let f = ShiftedObjective::new(base, shift);

        if k == 0 {
            return self.smooth(0, &f, shifted_quad.as_ref(), bounds, target, x, 0);
        }
        let x = self.smooth(k, &f, shifted_quad.as_ref(), bounds, target, x, pre)?;

        let x_coarse = hier.restrict_unchecked(k, &x);
        let (mut lo_hat, mut up_hat) = shifted_bounds(bounds, &x);
        let active = ActiveSetMask::classify(&x, bounds);
        let mask = (truncated && k == j).then(|| active.active());
        if k == j {
            truncate_bounds(&mut lo_hat, &mut up_hat, &active);
        }
        let (coarse_lower, coarse_upper) = if truncated {
            (hier.neighborhoods(k).max_of(&lo_hat), hier.neighborhoods(k).min_of(&up_hat))
        } else {
            (
                hier.neighborhoods(k).guarded_max_of(&lo_hat, &active.lower()),
                hier.neighborhoods(k).guarded_min_of(&up_hat, &active.upper()),
            )
        };
        let coarse_bounds = BoundSet {
            lower: coarse_lower.iter().zip(&x_coarse).map(|(a, b)| a + b).collect(),
            upper: coarse_upper.iter().zip(&x_coarse).map(|(a, b)| a + b).collect(),
        };
        let coarse_target = target.map(|_| x_coarse.iter().sum::<f64>());

        // coarse model of the next level
        let owned_chain;
        let mut links = Vec::new();
        let coarse_model = match (self.coarse_model, model) {
            (CoarseModel::Galerkin, Model::Native) if self.quadratics.is_some() => {
                let q = &self.quadratics.as_ref().expect("quadratic data")[j].matrix;
                let q = match &mask {
                    Some(m) => q.without_rows_cols(m)?,
                    None => q.clone(),
                };
                owned_chain = galerkin_chain(q, &hier, k)?;
                Model::Matrices(&owned_chain)
            }
            (CoarseModel::Galerkin, Model::Native | Model::Composed(_)) => {
                if let Model::Composed(prev) = model {
                    links.extend_from_slice(prev);
                }
                links.push(Rc::new(Link {
                    level: k,
                    fine_base: x.clone(),
                    coarse_base: x_coarse.clone(),
                    mask: mask.clone(),
                }));
                Model::Composed(&links)
            }
            (_, Model::Matrices(g)) => Model::Matrices(g),
            _ => Model::Native,
        };

        // v_{k-1} = R v_k + ∇f_{k-1}(R x) - R g_k; the last two cancel for
        // composed models
        let mut coarse_shift = hier.restrict_unchecked(k, shift);
        if !matches!(coarse_model, Model::Composed(_)) {
            let mut grad = Counted::new(base, self.counts.level(k)).gradient(&x);
            if let Some(m) = &mask {
                zero_where(&mut grad, m);
            }
            let coarse_grad = match coarse_model {
                Model::Matrices(g) => {
                    self.counts.level(k - 1).bump_gradient();
                    g[k - 1].mul_vec(&x_coarse)?
                }
                _ => Counted::new(&problem.level(k - 1).objective, self.counts.level(k - 1)).gradient(&x_coarse),
            };
            let r_grad = hier.restrict_unchecked(k, &grad);
            for i in 0..coarse_shift.len() {
                coarse_shift[i] += coarse_grad[i] - r_grad[i];
            }
        }

        let y = self.fas_level(k - 1, x_coarse.clone(), &coarse_shift, &coarse_bounds, coarse_target, truncated, coarse_model)?;
        let correction: Vec<f64> = y.iter().zip(&x_coarse).map(|(a, b)| a - b).collect();
        let mut x = x;
        add_correction(&hier, k, &correction, &mut x, mask.as_deref());
        self.smooth(k, &f, shifted_quad.as_ref(), bounds, target, x, post)
    }
}

/// Coarse objective handed down the V-cycle.
#[derive(Clone, Copy)]
enum Model<'m> {
    /// The problem's own objective on the level.
    Native,
    /// Galerkin matrices indexed by level.
    Matrices(&'m [CsrMatrix]),
    /// The finest objective pulled back through the transfers, finest first.
    Composed(&'m [Rc<Link>]),
}

/// Transfer into level `level`: `y ↦ fine_base + T P (y - coarse_base)`.
struct Link {
    level: usize,
    fine_base: Vec<f64>,
    coarse_base: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// `f(y) = 4^{-L} f_j(u(y))` for `L` chained transfers, with gradient
/// `R T ⋯ R T ∇f_j(u(y))`.
struct Composed<'m> {
    finest: &'m dyn Objective,
    hier: &'m GridHierarchy,
    links: &'m [Rc<Link>],
    dim: usize,
}

impl Composed<'_> {
    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut u = y.to_vec();
        for link in self.links.iter().rev() {
            u.iter_mut().zip(&link.coarse_base).for_each(|(a, b)| *a -= b);
            let mut fine = link.fine_base.clone();
            add_correction(self.hier, link.level, &u, &mut fine, link.mask.as_deref());
            u = fine;
        }
        u
    }
}

impl Objective for Composed<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.finest.value(&self.lift(y)) * 0.25f64.powi(self.links.len() as i32)
    }

    fn gradient_into(&self, y: &[f64], grad: &mut [f64]) {
        let mut g = self.finest.gradient(&self.lift(y));
        for link in self.links {
            if let Some(m) = &link.mask {
                zero_where(&mut g, m);
            }
            g = self.hier.restrict_unchecked(link.level, &g);
        }
        grad.copy_from_slice(&g);
    }
}

/// `(Q·scale, load·scale)` of a quadratic level objective.
fn scaled_quadratic(obj: &crate::problems::LevelObjective) -> Quadratic {
    let mut q = obj.stiffness().expect("quadratic level").clone();
    q.scale(obj.scale());
    let linear = match obj.load() {
        Some(b) => b.iter().map(|v| v * obj.scale()).collect(),
        None => vec![0.0; q.nrows()],
    };
    Quadratic::new(q, linear)
}

/// Galerkin matrices for levels `0..k` from the level-`k` matrix; the entry
/// at index `i` belongs to level `i`, the last one is `finest` itself.
fn galerkin_chain(finest: CsrMatrix, hier: &GridHierarchy, k: usize) -> Result<Vec<CsrMatrix>> {
    let mut chain = vec![finest];
    for level in (1..=k).rev() {
        let next = galerkin_coarse(chain.last().expect("nonempty"), hier, level)?;
        chain.push(next);
    }
    chain.reverse();
    Ok(chain)
}

fn shifted_bounds(bounds: &BoundSet, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = bounds.lower.iter().zip(x).map(|(b, v)| b - v).collect();
    let up = bounds.upper.iter().zip(x).map(|(b, v)| b - v).collect();
    (lo, up)
}

/// Shifted bounds of active nodes become infinite.
fn truncate_bounds(lo_hat: &mut [f64], up_hat: &mut [f64], active: &ActiveSetMask) {
    for (i, tag) in active.tags().iter().enumerate() {
        match tag {
            crate::problems::Activity::Lower => lo_hat[i] = f64::NEG_INFINITY,
            crate::problems::Activity::Upper => up_hat[i] = f64::INFINITY,
            crate::problems::Activity::Free => {}
        }
    }
}

fn zero_where(v: &mut [f64], mask: &[bool]) {
    v.iter_mut().zip(mask).filter(|(_, m)| **m).for_each(|(x, _)| *x = 0.0);
}

/// `x += P c`, with the correction dropped at masked (truncated) nodes.
fn add_correction(
    hier: &GridHierarchy,
    k: usize,
    coarse: &[f64],
    x: &mut [f64],
    mask: Option<&[bool]>,
) {
    match mask {
        None => hier.prolongate_add(k, coarse, x),
        Some(mask) => {
            let mut c = vec![0.0; x.len()];
            hier.prolongate_add(k, coarse, &mut c);
            for i in 0..x.len() {
                if !mask[i] {
                    x[i] += c[i];
                }
            }
        }
    }
}

/// Runs V-cycles from the zero vector.
///
/// With a reference solution the run stops once
/// `‖x - x*‖ ≤ error_tolerance · ‖x*‖`; without one it stops once a cycle
/// moves the iterate by at most `step_tolerance`. Either way at most
/// `max_cycles` cycles are run.
pub fn solve(problem: &Problem, config: &VCycleConfig, reference: Option<&[f64]>) -> Result<SolveReport> {
    let n = problem.hierarchy().level(problem.finest()).n;
    solve_from(problem, config, &vec![0.0; n], reference)
}

pub fn solve_from(
    problem: &Problem,
    config: &VCycleConfig,
    x0: &[f64],
    reference: Option<&[f64]>,
) -> Result<SolveReport> {
    let mut solver = MultigridSolver::new(problem, *config)?;
    let j = problem.finest();
    check_len(problem.hierarchy().level(j).n, x0.len())?;
    if let Some(r) = reference {
        check_len(x0.len(), r.len())?;
    }
    let bounds = &problem.level(j).bounds;
    let gamma = problem.level(j).equality;
    let ref_norm = reference.map(norm);

    let mut x = x0.to_vec();
    let mut errors = Vec::new();
    if let Some(r) = reference {
        errors.push(distance(&x, r));
    }
    let mut steps = Vec::new();
    let mut equality_residuals = Vec::new();
    let mut feasible = true;
    let mut converged = false;
    let mut cycles = 0;
    while cycles < config.max_cycles {
        let next = solver.cycle(&x)?;
        cycles += 1;
        let step = distance(&next, &x);
        x = next;
        steps.push(step);
        feasible &= bounds.contains(&x);
        if let Some(g) = gamma {
            equality_residuals.push((x.iter().sum::<f64>() - g).abs() / g.abs().max(f64::MIN_POSITIVE));
        }
        let done = match (reference, ref_norm) {
            (Some(r), Some(rn)) => {
                let e = distance(&x, r);
                errors.push(e);
                e <= config.error_tolerance * rn
            }
            _ => step <= config.step_tolerance,
        };
        if done {
            converged = true;
            break;
        }
    }
    let rate = if errors.len() >= 4 {
        asymptotic_rate(&errors[1..]).ok()
    } else {
        None
    };
    Ok(SolveReport {
        x,
        cycles,
        errors,
        steps,
        equality_residuals,
        feasible,
        evals: solver.level_evals(),
        rate,
        converged,
    })
}

/// High-accuracy solution used to measure errors.
#[derive(Debug, Clone)]
pub struct Reference {
    pub x: Vec<f64>,
    /// Stationarity residual of `x` on the finest level.
    pub residual: f64,
    pub cycles: usize,
}

/// Computes a reference solution: untruncated FAS cycles with three
/// smoothing steps until the cycles stop making progress, followed by
/// gradient projection (or the Armijo method under the equality constraint)
/// until the stationarity residual is at most `tolerance` or stalls.
pub fn reference_solution(problem: &Problem, tolerance: f64) -> Result<Reference> {
    let j = problem.finest();
    let config = VCycleConfig {
        tolerance: tolerance.min(1e-9),
        coarse_tolerance: tolerance.min(1e-9),
        ..VCycleConfig::gp(Variant::FasPlain, 3)
    };
    let mut solver = MultigridSolver::new(problem, config)?;
    let mut x = vec![0.0; problem.hierarchy().level(j).n];
    let mut best_step = f64::INFINITY;
    let mut stalls = 0;
    let mut cycles = 0;
    while cycles < 300 {
        let next = solver.cycle(&x)?;
        cycles += 1;
        let step = distance(&next, &x);
        x = next;
        if step <= 1e-15 * norm(&x).max(1.0) {
            break;
        }
        if step < 0.5 * best_step {
            best_step = step;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        }
    }

    let data = problem.level(j);
    let f = &data.objective;
    let cfg = SmootherConfig::new(tolerance, 2_000);
    let mut state = StepState::new(1.0);
    let (x, residual) = match data.equality {
        Some(gamma) => {
            let r = armijo_pg_solve(f, &data.bounds, gamma, &x, &cfg, &mut state)?;
            let res = kkt_residual_with_sum(f, &data.bounds, gamma, &r.x)?;
            (r.x, res)
        }
        None => {
            let r = gp_solve(f, &data.bounds, &x, &cfg, &mut state)?;
            let res = kkt_residual(f, &data.bounds, &r.x)?;
            (r.x, res)
        }
    };
    Ok(Reference { x, residual, cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Family;

    #[test]
    fn names_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("gsp".parse::<SmootherKind>().unwrap(), SmootherKind::Gsp);
        assert!("w-cycle".parse::<Variant>().is_err());
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let eq = Problem::build(Family::Equality, 2).unwrap();
        for v in [Variant::CsTruncated, Variant::FasTruncated] {
            assert!(matches!(
                MultigridSolver::new(&eq, VCycleConfig::gp(v, 1)),
                Err(Error::VariantMismatch { .. })
            ));
        }
        let nq = Problem::build(Family::Nonquadratic, 2).unwrap();
        assert!(MultigridSolver::new(&nq, VCycleConfig::gp(Variant::CsTruncated, 1)).is_err());
        let gsp = VCycleConfig {
            smoother: SmootherKind::Gsp,
            ..VCycleConfig::gp(Variant::FasPlain, 1)
        };
        assert!(MultigridSolver::new(&nq, gsp).is_err());
        assert!(MultigridSolver::new(&nq, VCycleConfig::gp(Variant::FasPlain, 0)).is_err());
    }

    #[test]
    fn zero_cycles_returns_start() {
        let p = Problem::build(Family::Spiral, 2).unwrap();
        let cfg = VCycleConfig {
            max_cycles: 0,
            ..VCycleConfig::gp(Variant::CsTruncated, 1)
        };
        let r = solve(&p, &cfg, None).unwrap();
        assert_eq!(r.cycles, 0);
        assert!(r.steps.is_empty());
        assert!(r.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equality_target_of_zero_and_prolongation() {
        let p = Problem::build(Family::Equality, 1).unwrap();
        assert_eq!(restrict_equality_target(&p, 1, &[0.0; 9]).unwrap(), 0.0);
        let fine = p.hierarchy().prolongate(1, &[2.0]).unwrap();
        // R P e = 0.5625 on the single coarse node
        assert!((restrict_equality_target(&p, 1, &fine).unwrap() - 1.125).abs() < 1e-15);
    }
}
