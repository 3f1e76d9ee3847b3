//! Smoothing-property instrumentation and convergence-rate accounting.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hierarchy::{build_hierarchy, GridHierarchy};
use crate::objective::{dot, Quadratic};
use crate::problems::{assemble_laplacian, BoundSet};
use crate::smoothers::{pgs_sweep, sd_solve, SmootherConfig, StepState};
use crate::sparse::CsrMatrix;

/// Energy-norm split of an error vector into its coarse-grid (low) and
/// complementary (high) components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    /// `‖S e‖_Q`
    pub low: f64,
    /// `‖T e‖_Q`
    pub high: f64,
}

impl ErrorSplit {
    /// `‖e‖_Q`
    pub fn total(&self) -> f64 {
        self.low.hypot(self.high)
    }
}

/// `S = P (PᵀQP)⁻¹ PᵀQ` and `T = I − S` for one fine matrix.
pub struct SmoothingProjectors {
    q: CsrMatrix,
    p: CsrMatrix,
    pt: CsrMatrix,
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

/// Builds the projectors for the level-`k` matrix `q_fine` and the transfer
/// from level `k - 1`.
pub fn smoothing_projectors(q_fine: &CsrMatrix, hier: &GridHierarchy, k: usize) -> Result<SmoothingProjectors> {
    if k == 0 || k > hier.finest() {
        return Err(Error::InvalidLevel(k as i64));
    }
    check_len(hier.level(k).n, q_fine.nrows())?;
    let p = hier.prolongation(k).clone();
    let pt = hier.prolongation_transpose(k).clone();
    let gram = pt.matmul(&q_fine.matmul(&p)?)?;
    let nc = gram.nrows();
    let mut dense = DMatrix::zeros(nc, nc);
    for i in 0..nc {
        for (j, v) in gram.row(i) {
            dense[(i, j)] = v;
        }
    }
    let gram = dense.cholesky().ok_or(Error::SingularGram)?;
    Ok(SmoothingProjectors {
        q: q_fine.clone(),
        p,
        pt,
        gram,
    })
}

impl SmoothingProjectors {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `S e`
    pub fn low(&self, e: &[f64]) -> Vec<f64> {
        let qe = self.q.mul_vec(e).expect("length checked by caller");
        let rhs = DVector::from_vec(self.pt.mul_vec(&qe).expect("square"));
        let v = self.gram.solve(&rhs);
        self.p.mul_vec(v.as_slice()).expect("coarse length")
    }

    /// `T e = e − S e`
    pub fn high(&self, e: &[f64]) -> Vec<f64> {
        let s = self.low(e);
        e.iter().zip(&s).map(|(a, b)| a - b).collect()
    }

    /// `⟨a, b⟩_Q`
    pub fn energy_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(&self.q.mul_vec(a).expect("length"), b)
    }

    pub fn split(&self, e: &[f64]) -> Result<ErrorSplit> {
        check_len(self.dim(), e.len())?;
        let s = self.low(e);
        let t: Vec<f64> = e.iter().zip(&s).map(|(a, b)| a - b).collect();
        Ok(ErrorSplit {
            low: self.energy_inner(&s, &s).max(0.0).sqrt(),
            high: self.energy_inner(&t, &t).max(0.0).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMethod {
    /// Steepest descent with the exact step `gᵀg / gᵀQg`.
    SdExact,
    /// Steepest descent with the gradient-based line search.
    SdInexact,
    /// Lexicographic Gauss-Seidel.
    GaussSeidel,
}

impl SmoothingMethod {
    pub const ALL: [SmoothingMethod; 3] = [
        SmoothingMethod::SdExact,
        SmoothingMethod::SdInexact,
        SmoothingMethod::GaussSeidel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SmoothingMethod::SdExact => "sd-exact",
            SmoothingMethod::SdInexact => "sd-inexact",
            SmoothingMethod::GaussSeidel => "gauss-seidel",
        }
    }
}

impl fmt::Display for SmoothingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmoothingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SmoothingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown smoothing method `{s}`")))
    }
}

/// Level of the smoothing experiment: 31×31 interior nodes.
pub const SMOOTHING_LEVEL: usize = 4;

/// Error splits of one smoothing run; entry `i` is taken after `i` iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingTrace {
    pub method: SmoothingMethod,
    pub seed: u64,
    pub splits: Vec<ErrorSplit>,
}

impl SmoothingTrace {
    /// `(‖S eᵢ‖_Q / ‖S e₀‖_Q, ‖T eᵢ‖_Q / ‖T e₀‖_Q)`
    pub fn ratios(&self, i: usize) -> (f64, f64) {
        let (a, b) = (self.splits[0], self.splits[i]);
        (b.low / a.low, b.high / a.high)
    }
}

/// Poisson model problem of the smoothing experiment.
pub struct SmoothingSetup {
    pub hierarchy: GridHierarchy,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub solution: Vec<f64>,
    pub projectors: SmoothingProjectors,
}

impl SmoothingSetup {
    pub fn new() -> Result<Self> {
        let hierarchy = build_hierarchy(SMOOTHING_LEVEL as i64)?;
        let level = *hierarchy.finest_level();
        let (matrix, _) = assemble_laplacian(&level);
        let h2 = level.h * level.h;
        let pi = std::f64::consts::PI;
        let rhs = level.sample(|x1, x2| h2 * (pi * x1).sin() * (pi * x2).sin());
        let n = level.n;
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                dense[(i, j)] = v;
            }
        }
        let chol = dense.cholesky().ok_or(Error::SingularGram)?;
        let solution = chol.solve(&DVector::from_vec(rhs.clone())).as_slice().to_vec();
        let projectors = smoothing_projectors(&matrix, &hierarchy, SMOOTHING_LEVEL)?;
        Ok(Self {
            hierarchy,
            matrix,
            rhs,
            solution,
            projectors,
        })
    }

    /// Standard-normal starting point drawn from a seeded generator.
    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.matrix.nrows()).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn split_at(&self, x: &[f64]) -> Result<ErrorSplit> {
        let e: Vec<f64> = x.iter().zip(&self.solution).map(|(a, b)| a - b).collect();
        self.projectors.split(&e)
    }

    /// Runs `iterations` steps of `method` from the seeded start.
    pub fn run(&self, method: SmoothingMethod, iterations: usize, seed: u64) -> Result<SmoothingTrace> {
        let mut x = self.initial_point(seed);
        let mut splits = vec![self.split_at(&x)?];
        let quad = Quadratic::new(self.matrix.clone(), self.rhs.clone());
        let unbounded = BoundSet::unbounded(x.len());
        let mut state = StepState::new(1.0);
        let one_step = SmootherConfig::new(0.0, 1);
        for _ in 0..iterations {
            match method {
                SmoothingMethod::SdExact => {
                    let mut g = self.matrix.mul_vec(&x)?;
                    g.iter_mut().zip(&self.rhs).for_each(|(a, b)| *a -= b);
                    let gqg = self.matrix.quadratic_form(&g);
                    if gqg > 0.0 {
                        let s = dot(&g, &g) / gqg;
                        x.iter_mut().zip(&g).for_each(|(a, b)| *a -= s * b);
                    }
                }
                SmoothingMethod::SdInexact => {
                    x = sd_solve(&quad, &x, &one_step, &mut state)?.x;
                }
                SmoothingMethod::GaussSeidel => pgs_sweep(&self.matrix, &self.rhs, &unbounded, &mut x)?,
            }
            splits.push(self.split_at(&x)?);
        }
        Ok(SmoothingTrace { method, seed, splits })
    }
}

/// Builds the model problem and runs one method.
pub fn run_smoothing_experiment(iterations: usize, method: SmoothingMethod, seed: u64) -> Result<SmoothingTrace> {
    SmoothingSetup::new()?.run(method, iterations, seed)
}

/// Asymptotic rate of an error history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub errors: Vec<f64>,
    /// `(e_k / e_1)^(1/(k-1))` over the whole history.
    pub formula: f64,
    /// Geometric mean of the last `min(5, k-1)` successive ratios.
    pub rate: f64,
}

/// Number of trailing ratios averaged by [`asymptotic_rate`].
pub const RATE_WINDOW: usize = 5;

pub fn asymptotic_rate(errors: &[f64]) -> Result<RateEstimate> {
    if errors.len() < 3 {
        return Err(Error::TooFewErrors(errors.len()));
    }
    if let Some(i) = errors.iter().position(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::NonFinite(i));
    }
    if errors[0] == 0.0 {
        return Err(Error::TooFewErrors(errors.len()));
    }
    let k = errors.len();
    let formula = (errors[k - 1] / errors[0]).powf(1.0 / (k - 1) as f64);
    let window = RATE_WINDOW.min(k - 1);
    let first = errors[k - 1 - window];
    let rate = if first == 0.0 {
        0.0
    } else {
        (errors[k - 1] / first).powf(1.0 / window as f64)
    };
    Ok(RateEstimate {
        errors: errors.to_vec(),
        formula,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        let geo: Vec<f64> = (0..10).map(|i| 0.5f64.powi(i)).collect();
        let r = asymptotic_rate(&geo).unwrap();
        assert!((r.rate - 0.5).abs() < 1e-14 && (r.formula - 0.5).abs() < 1e-14);
        let r = asymptotic_rate(&[1.0, 0.1, 0.01]).unwrap();
        assert!((r.formula - 0.1).abs() < 1e-14 && (r.rate - 0.1).abs() < 1e-14);
        assert_eq!(asymptotic_rate(&[3.0; 4]).unwrap().rate, 1.0);
        assert!(matches!(asymptotic_rate(&[1.0, 0.5]), Err(Error::TooFewErrors(2))));
    }

    #[test]
    fn rate_window_uses_last_ratios() {
        // early ratio 0.9, then five ratios of 0.1
        let mut e = vec![1.0, 0.9];
        for _ in 0..5 {
            let last = *e.last().unwrap();
            e.push(last * 0.1);
        }
        assert!((asymptotic_rate(&e).unwrap().rate - 0.1).abs() < 1e-12);
    }

    #[test]
    fn projectors_on_small_level() {
        let hier = build_hierarchy(2).unwrap();
        let (q, _) = assemble_laplacian(hier.finest_level());
        let proj = smoothing_projectors(&q, &hier, 2).unwrap();
        let v: Vec<f64> = (0..hier.level(1).n).map(|i| (i as f64 * 0.7).sin()).collect();
        let pv = hier.prolongate(2, &v).unwrap();
        let t = proj.high(&pv);
        assert!(t.iter().all(|x| x.abs() < 1e-12));
        let e: Vec<f64> = (0..hier.level(2).n).map(|i| (i as f64 * 1.3).cos()).collect();
        let s = proj.low(&e);
        let t = proj.high(&e);
        assert!(proj.energy_inner(&s, &t).abs() < 1e-10);
        let split = proj.split(&e).unwrap();
        let total = proj.energy_inner(&e, &e);
        assert!((split.low.powi(2) + split.high.powi(2) - total).abs() < 1e-10 * total);
    }

    #[test]
    fn coarsest_level_has_no_projector() {
        let hier = build_hierarchy(1).unwrap();
        let (q, _) = assemble_laplacian(hier.level(0));
        assert!(matches!(smoothing_projectors(&q, &hier, 0), Err(Error::InvalidLevel(0))));
    }
}
