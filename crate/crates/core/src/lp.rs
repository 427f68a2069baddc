//! Small dense phase-one simplex for convex-combination feasibility.
//!
//! Both polytope membership and vertex filtering reduce to asking whether a
//! target point is a convex combination of a finite point set. The LP
//!
//! ```text
//! min  sum(a)   s.t.  sum_k w_k p_k + a_top = q,  sum_k w_k + a_last = 1,  w, a >= 0
//! ```
//!
//! (with rows sign-flipped so the right-hand side is nonnegative) has optimum
//! zero exactly when `q ∈ conv(p)`; otherwise the optimum is the L1 residual
//! of the best convex combination. Bland's rule keeps it cycle-free.

use crate::spectral::Vector;

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HullFit {
    /// Minimal L1 residual `‖sum w_k p_k - q‖₁ + |sum w_k - 1|`.
    pub residual: f64,
    pub weights: Vec<f64>,
}

/// Best convex combination of `points` approximating `target` in the L1 sense.
///
/// Panics if `points` is empty or the dimensions disagree.
pub fn convex_fit(points: &[&Vector], target: &Vector) -> HullFit {
    assert!(!points.is_empty(), "convex_fit needs at least one point");
    let d = target.len();
    assert!(points.iter().all(|p| p.len() == d), "point dimension mismatch");

    let rows = d + 1;
    let cols = points.len() + rows;
    let width = cols + 1; // trailing rhs column
    let mut tab = vec![0.0; rows * width];
    for i in 0..rows {
        let rhs = if i < d { target[i] } else { 1.0 };
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for (k, p) in points.iter().enumerate() {
            let coef = if i < d { p[i] } else { 1.0 };
            tab[i * width + k] = sign * coef;
        }
        tab[i * width + points.len() + i] = 1.0;
        tab[i * width + cols] = sign * rhs;
    }
    let mut basis: Vec<usize> = (0..rows).map(|i| points.len() + i).collect();

    let is_artificial = |j: usize| j >= points.len();
    let max_pivots = 50 * (rows + cols);
    for _ in 0..max_pivots {
        // Reduced cost of column j is -sum_{i: basis[i] artificial} tab[i][j]
        // (plus 1 when j itself is artificial).
        let entering = (0..cols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut rc = if is_artificial(j) { 1.0 } else { 0.0 };
            for i in 0..rows {
                if is_artificial(basis[i]) {
                    rc -= tab[i * width + j];
                }
            }
            rc < -1e-11
        });
        let Some(j) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = tab[i * width + j];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + cols] / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase-one objective is bounded below, so an entering column always
        // has a positive entry; bail out defensively if rounding says otherwise.
        let Some((r, _)) = leave else { break };
        pivot(&mut tab, width, rows, r, j);
        basis[r] = j;
    }

    let mut weights = vec![0.0; points.len()];
    let mut residual = 0.0;
    for i in 0..rows {
        let v = tab[i * width + cols].max(0.0);
        if is_artificial(basis[i]) {
            residual += v;
        } else {
            weights[basis[i]] = v;
        }
    }
    HullFit { residual, weights }
}

fn pivot(tab: &mut [f64], width: usize, rows: usize, r: usize, j: usize) {
    let p = tab[r * width + j];
    for c in 0..width {
        tab[r * width + c] /= p;
    }
    for i in 0..rows {
        if i == r {
            continue;
        }
        let f = tab[i * width + j];
        if f != 0.0 {
            for c in 0..width {
                tab[i * width + c] -= f * tab[r * width + c];
            }
        }
    }
}

/// Whether `target` lies in the convex hull of `points` up to an L1 residual of `tol`.
pub fn in_hull(points: &[&Vector], target: &Vector, tol: f64) -> bool {
    convex_fit(points, target).residual <= tol
}
