//! Nested uniform square meshes on the unit square with bilinear elements.
//!
//! Level `k` has `m = 2^(k+1) - 1` interior nodes per side, mesh size
//! `h = 1 / 2^(k+1)`, and unknowns numbered row-major (row ↔ `x₂`, column ↔
//! `x₁`). Boundary nodes carry no unknowns; stencil weights that would land on
//! them are dropped.
//!
//! Coarse node `(r, c)` sits on fine node `(2r + 1, 2c + 1)`. The nine-point
//! prolongation stencil spreads a coarse value onto the 3×3 fine block around
//! that image, and restriction is full weighting, `¼ Pᵀ`.

use crate::error::{check_len, Error, Result};
use crate::sparse::CsrMatrix;

/// Largest supported finest level.
pub const MAX_LEVEL: usize = 12;

/// Weight of the prolongation stencil at offset `(dr, dc)`, `dr, dc ∈ {-1, 0, 1}`.
#[inline]
fn stencil_weight(dr: isize, dc: isize) -> f64 {
    let w = |d: isize| if d == 0 { 1.0 } else { 0.5 };
    w(dr) * w(dc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLevel {
    pub index: usize,
    /// Interior nodes per side.
    pub m: usize,
    /// Interior node count, `m²`.
    pub n: usize,
    pub h: f64,
}

impl GridLevel {
    pub fn new(index: usize) -> Self {
        let cells = 1usize << (index + 1);
        let m = cells - 1;
        Self {
            index,
            m,
            n: m * m,
            h: 1.0 / cells as f64,
        }
    }

    #[inline]
    pub fn node(&self, row: usize, col: usize) -> usize {
        row * self.m + col
    }

    /// `(row, col)` of node `i`.
    #[inline]
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i / self.m, i % self.m)
    }

    /// Physical coordinates `(x₁, x₂)` of node `i`.
    pub fn coords(&self, i: usize) -> (f64, f64) {
        let (row, col) = self.position(i);
        ((col + 1) as f64 * self.h, (row + 1) as f64 * self.h)
    }

    /// Evaluates `f(x₁, x₂)` at every interior node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (x1, x2) = self.coords(i);
                f(x1, x2)
            })
            .collect()
    }
}

/// For each coarse node, the interior fine nodes of the open 3×3 block
/// around its fine image, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Neighborhoods {
    /// Builds the table from explicit index lists (used for 1D checks).
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        for list in lists {
            indices.extend_from_slice(list);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    fn for_level(fine: &GridLevel, coarse: &GridLevel) -> Self {
        let mut offsets = Vec::with_capacity(coarse.n + 1);
        let mut indices = Vec::with_capacity(9 * coarse.n);
        offsets.push(0);
        let mf = fine.m as isize;
        for ic in 0..coarse.n {
            let (rc, cc) = coarse.position(ic);
            let (rf, cf) = (2 * rc as isize + 1, 2 * cc as isize + 1);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (r, c) = (rf + dr, cf + dc);
                    if (0..mf).contains(&r) && (0..mf).contains(&c) {
                        indices.push(fine.node(r as usize, c as usize));
                    }
                }
            }
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    fn fold(&self, y: &[f64], init: f64, pick: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.get(i).iter().fold(init, |acc, &j| pick(acc, y[j])))
            .collect()
    }

    /// `max { y_j : j ∈ N(i) }` for each coarse `i`.
    pub fn max_of(&self, y: &[f64]) -> Vec<f64> {
        self.fold(y, f64::NEG_INFINITY, f64::max)
    }

    /// `min { y_j : j ∈ N(i) }` for each coarse `i`.
    pub fn min_of(&self, y: &[f64]) -> Vec<f64> {
        self.fold(y, f64::INFINITY, f64::min)
    }

    /// Like [`max_of`](Self::max_of) but yields `0` wherever a neighbourhood
    /// contains a node flagged in `active`.
    pub fn guarded_max_of(&self, y: &[f64], active: &[bool]) -> Vec<f64> {
        let mut out = self.max_of(y);
        self.apply_guard(&mut out, active);
        out
    }

    /// Like [`min_of`](Self::min_of) with the same zero guard.
    pub fn guarded_min_of(&self, y: &[f64], active: &[bool]) -> Vec<f64> {
        let mut out = self.min_of(y);
        self.apply_guard(&mut out, active);
        out
    }

    fn apply_guard(&self, out: &mut [f64], active: &[bool]) {
        for (i, v) in out.iter_mut().enumerate() {
            if self.get(i).iter().any(|&j| active[j]) {
                *v = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridHierarchy {
    levels: Vec<GridLevel>,
    /// `prolongations[k - 1]` maps level `k - 1` to level `k`.
    prolongations: Vec<CsrMatrix>,
    /// Transposes of `prolongations`.
    transposes: Vec<CsrMatrix>,
    neighborhoods: Vec<Neighborhoods>,
}

/// Builds levels `0..=finest`.
pub fn build_hierarchy(finest: i64) -> Result<GridHierarchy> {
    if finest < 0 || finest > MAX_LEVEL as i64 {
        return Err(Error::InvalidLevel(finest));
    }
    let levels: Vec<GridLevel> = (0..=finest as usize).map(GridLevel::new).collect();
    let mut prolongations = Vec::new();
    let mut neighborhoods = Vec::new();
    for pair in levels.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        prolongations.push(prolongation_matrix(fine, coarse));
        neighborhoods.push(Neighborhoods::for_level(fine, coarse));
    }
    let transposes = prolongations.iter().map(CsrMatrix::transpose).collect();
    Ok(GridHierarchy {
        levels,
        prolongations,
        transposes,
        neighborhoods,
    })
}

fn prolongation_matrix(fine: &GridLevel, coarse: &GridLevel) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * coarse.n);
    let mf = fine.m as isize;
    for ic in 0..coarse.n {
        let (rc, cc) = coarse.position(ic);
        let (rf, cf) = (2 * rc as isize + 1, 2 * cc as isize + 1);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (r, c) = (rf + dr, cf + dc);
                if (0..mf).contains(&r) && (0..mf).contains(&c) {
                    triplets.push((fine.node(r as usize, c as usize), ic, stencil_weight(dr, dc)));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.n, coarse.n, &triplets)
}

impl GridHierarchy {
    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &GridLevel {
        &self.levels[k]
    }

    pub fn finest_level(&self) -> &GridLevel {
        self.levels.last().expect("at least one level")
    }

    pub fn levels(&self) -> &[GridLevel] {
        &self.levels
    }

    /// Prolongation matrix from level `k - 1` to level `k`.
    pub fn prolongation(&self, k: usize) -> &CsrMatrix {
        assert!(k >= 1 && k <= self.finest(), "no transfer into level {k}");
        &self.prolongations[k - 1]
    }

    /// `Pᵀ` for the transfer into level `k` (no ¼ factor).
    pub fn prolongation_transpose(&self, k: usize) -> &CsrMatrix {
        assert!(k >= 1 && k <= self.finest(), "no transfer into level {k}");
        &self.transposes[k - 1]
    }

    /// Neighbourhoods of the coarse nodes of level `k - 1` on level `k`.
    pub fn neighborhoods(&self, k: usize) -> &Neighborhoods {
        assert!(k >= 1 && k <= self.finest(), "no transfer into level {k}");
        &self.neighborhoods[k - 1]
    }

    fn check_pair(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.finest() {
            Err(Error::InvalidLevel(k as i64))
        } else {
            Ok(())
        }
    }

    /// Interpolates a level `k - 1` vector onto level `k`.
    pub fn prolongate(&self, k: usize, coarse: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k - 1].n, coarse.len())?;
        let mut fine = vec![0.0; self.levels[k].n];
        self.prolongate_add(k, coarse, &mut fine);
        Ok(fine)
    }

    /// `fine += P coarse`, stencil-based.
    pub(crate) fn prolongate_add(&self, k: usize, coarse: &[f64], fine: &mut [f64]) {
        let (cl, fl) = (&self.levels[k - 1], &self.levels[k]);
        let m = fl.m;
        for (ic, &v) in coarse.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (rc, cc) = cl.position(ic);
            let center = fl.node(2 * rc + 1, 2 * cc + 1);
            let (half, quarter) = (0.5 * v, 0.25 * v);
            fine[center] += v;
            fine[center - 1] += half;
            fine[center + 1] += half;
            fine[center - m] += half;
            fine[center + m] += half;
            fine[center - m - 1] += quarter;
            fine[center - m + 1] += quarter;
            fine[center + m - 1] += quarter;
            fine[center + m + 1] += quarter;
        }
    }

    /// Full-weighting restriction of a level `k` vector to level `k - 1`.
    pub fn restrict(&self, k: usize, fine: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k].n, fine.len())?;
        Ok(self.restrict_unchecked(k, fine))
    }

    pub(crate) fn restrict_unchecked(&self, k: usize, fine: &[f64]) -> Vec<f64> {
        let (cl, fl) = (&self.levels[k - 1], &self.levels[k]);
        let m = fl.m;
        (0..cl.n)
            .map(|ic| {
                let (rc, cc) = cl.position(ic);
                let c = fl.node(2 * rc + 1, 2 * cc + 1);
                let edges = fine[c - 1] + fine[c + 1] + fine[c - m] + fine[c + m];
                let corners = fine[c - m - 1] + fine[c - m + 1] + fine[c + m - 1] + fine[c + m + 1];
                0.25 * (fine[c] + 0.5 * edges + 0.25 * corners)
            })
            .collect()
    }

    /// Max-restriction of lower bounds.
    pub fn restrict_bounds_max(&self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k].n, y.len())?;
        Ok(self.neighborhoods(k).max_of(y))
    }

    /// Min-restriction of upper bounds.
    pub fn restrict_bounds_min(&self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k].n, y.len())?;
        Ok(self.neighborhoods(k).min_of(y))
    }

    /// Guarded max-restriction: `0` on coarse nodes touching an active fine
    /// node, the neighbourhood maximum otherwise.
    pub fn restrict_bounds_guarded_lower(
        &self,
        k: usize,
        y: &[f64],
        active: &[bool],
    ) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k].n, y.len())?;
        check_len(self.levels[k].n, active.len())?;
        Ok(self.neighborhoods(k).guarded_max_of(y, active))
    }

    /// Guarded min-restriction, the mirror of
    /// [`restrict_bounds_guarded_lower`](Self::restrict_bounds_guarded_lower).
    pub fn restrict_bounds_guarded_upper(
        &self,
        k: usize,
        y: &[f64],
        active: &[bool],
    ) -> Result<Vec<f64>> {
        self.check_pair(k)?;
        check_len(self.levels[k].n, y.len())?;
        check_len(self.levels[k].n, active.len())?;
        Ok(self.neighborhoods(k).guarded_min_of(y, active))
    }
}
