//! The growing sample set and its convex-hull vertex filter.

use crate::error::{Error, Result};
use crate::lp;
use crate::spectral::{Matrix, Vector};
use crate::uncertainty::vec_pair;

pub const DEFAULT_DEDUP_TOL: f64 = 1e-12;
/// L1 residual below which a point counts as a convex combination of others.
pub const HULL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleSet {
    items: Vec<(Matrix, Matrix)>,
    dedup_tol: f64,
}

impl CounterexampleSet {
    /// Empty set; pairs closer than `dedup_tol` (max-abs entry distance) are
    /// treated as duplicates.
    pub fn new(dedup_tol: f64) -> Self {
        CounterexampleSet {
            items: Vec::new(),
            dedup_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(Matrix, Matrix)] {
        &self.items
    }

    pub fn vec_dim(&self) -> Option<usize> {
        self.items.first().map(|(a, b)| a.len() + b.len())
    }

    /// Append a pair, rejecting near-duplicates.
    pub fn add(&mut self, a: Matrix, b: Matrix) -> Result<()> {
        if let Some((a0, b0)) = self.items.first() {
            if a.shape() != a0.shape() || b.shape() != b0.shape() {
                return Err(Error::Dimension("counter-example shape differs from stored samples".into()));
            }
        }
        for (index, (ai, bi)) in self.items.iter().enumerate() {
            let distance = (ai - &a).amax().max((bi - &b).amax());
            if distance <= self.dedup_tol {
                return Err(Error::DuplicateCounterexample { index, distance });
            }
        }
        self.items.push((a, b));
        Ok(())
    }

    /// Indices of the items that are vertices of the hull of all items.
    pub fn hull_vertex_indices(&self) -> Vec<usize> {
        let pts: Vec<Vector> = self.items.iter().map(|(a, b)| vec_pair(a, b)).collect();
        let scale = pts.iter().map(|p| p.amax()).fold(1.0, f64::max);
        (0..pts.len())
            .filter(|&j| {
                let others: Vec<&Vector> = pts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, p)| p)
                    .collect();
                others.is_empty() || !lp::in_hull(&others, &pts[j], HULL_TOL * scale)
            })
            .collect()
    }

    /// Items that are vertices of the hull of all items.
    pub fn hull_vertices(&self) -> Vec<(Matrix, Matrix)> {
        self.hull_vertex_indices()
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }

    /// Whether `(a, b)` is a convex combination of the stored items.
    pub fn hull_contains(&self, a: &Matrix, b: &Matrix, tol: f64) -> bool {
        if self.items.is_empty() {
            return false;
        }
        let pts: Vec<Vector> = self.items.iter().map(|(x, y)| vec_pair(x, y)).collect();
        let refs: Vec<&Vector> = pts.iter().collect();
        lp::in_hull(&refs, &vec_pair(a, b), tol)
    }
}
