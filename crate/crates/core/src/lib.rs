//! First-order geometric multigrid for bound-constrained convex problems on
//! nested bilinear quadrilateral grids.
//!
//! The crate provides the grid hierarchy with its transfer operators, four
//! benchmark problem families, gradient-only smoothers, three V-cycle
//! variants, smoothing analysis, and an experiment harness that writes
//! convergence tables and curves.

// `!(a > b)` is used on purpose so that NaN settings are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod analysis;
pub mod harness;
pub mod hierarchy;
pub mod objective;
pub mod multigrid;
pub mod problems;
pub mod smoothers;
pub mod sparse;

pub use error::{Error, Result};
pub use hierarchy::{build_hierarchy, GridHierarchy, GridLevel};
pub use objective::{Counted, EvalCounter, EvalCounts, Objective, Quadratic, ShiftedObjective};
pub use problems::{ActiveSetMask, BoundSet, Family, Problem};
