use crate::error::{check_len, Error, Result};

/// Pointwise bounds `lower ≤ x ≤ upper`; infinite entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundSet {
    /// Fails unless both vectors have the same length and `lower < upper`
    /// holds everywhere.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len(lower.len(), upper.len())?;
        for (i, (&lo, &up)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || up.is_nan() || lo >= up {
                return Err(Error::Infeasible {
                    index: i,
                    value: f64::NAN,
                    lower: lo,
                    upper: up,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &up))| lo <= v && v <= up)
    }

    pub(crate) fn check_feasible(&self, x: &[f64]) -> Result<()> {
        check_len(self.len(), x.len())?;
        for (i, &v) in x.iter().enumerate() {
            if !(self.lower[i] <= v && v <= self.upper[i]) {
                return Err(Error::Infeasible {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }
}

/// Classification of a single node relative to its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetMask {
    tags: Vec<Activity>,
}

impl ActiveSetMask {
    pub fn all_free(n: usize) -> Self {
        Self {
            tags: vec![Activity::Free; n],
        }
    }

    pub fn from_tags(tags: Vec<Activity>) -> Self {
        Self { tags }
    }

    /// Classifies `x` by exact comparison with the bounds, without a
    /// feasibility check.
    pub fn classify(x: &[f64], bounds: &BoundSet) -> Self {
        let tags = x
            .iter()
            .zip(bounds.lower.iter().zip(&bounds.upper))
            .map(|(&v, (&lo, &up))| {
                if v == lo {
                    Activity::Lower
                } else if v == up {
                    Activity::Upper
                } else {
                    Activity::Free
                }
            })
            .collect();
        Self { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[Activity] {
        &self.tags
    }

    pub fn get(&self, i: usize) -> Activity {
        self.tags[i]
    }

    pub fn lower(&self) -> Vec<bool> {
        self.tags.iter().map(|t| *t == Activity::Lower).collect()
    }

    pub fn upper(&self) -> Vec<bool> {
        self.tags.iter().map(|t| *t == Activity::Upper).collect()
    }

    /// `true` where either bound is active.
    pub fn active(&self) -> Vec<bool> {
        self.tags.iter().map(|t| *t != Activity::Free).collect()
    }

    pub fn active_count(&self) -> usize {
        self.tags.iter().filter(|t| **t != Activity::Free).count()
    }
}

/// Active-set detection for a feasible point: `x_i == lower_i` or
/// `x_i == upper_i`, compared bit-exactly.
pub fn detect_active(x: &[f64], bounds: &BoundSet) -> Result<ActiveSetMask> {
    bounds.check_feasible(x)?;
    Ok(ActiveSetMask::classify(x, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_crossed_bounds() {
        assert!(BoundSet::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoundSet::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(BoundSet::new(vec![f64::NEG_INFINITY], vec![f64::INFINITY]).is_ok());
    }

    #[test]
    fn interior_points_are_free() {
        let b = BoundSet::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let m = detect_active(&[0.2, 0.5, 0.9], &b).unwrap();
        assert_eq!(m.active_count(), 0);
    }

    #[test]
    fn points_on_the_lower_bound() {
        let b = BoundSet::new(vec![-1.0, 0.5], vec![1.0, f64::INFINITY]).unwrap();
        let m = detect_active(&b.lower.clone(), &b).unwrap();
        assert_eq!(m.tags(), &[Activity::Lower, Activity::Lower]);
        assert!(m.upper().iter().all(|u| !u));
    }

    #[test]
    fn infeasible_points_are_rejected() {
        let b = BoundSet::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(detect_active(&[1.5], &b), Err(Error::Infeasible { index: 0, .. })));
    }
}
