//! DIRECT (DIviding RECTangles) global search on a box.
//!
//! The box is normalized to the unit cube. Every cell stores its center and
//! a per-coordinate trisection level (side `3^-level`). Each round selects
//! the potentially optimal cells (lower-right convex hull of
//! `(half-diagonal, value)` pairs with Jones' balance parameter), samples
//! `c ± δe_i` along their longest sides and trisects them, best side first.
//!
//! Constraints are handled by exact penalty: a point with `g > 0` scores
//! `max feasible value seen + ρ g`. Penalties are recomputed from stored raw
//! values at every selection, so evaluation order never affects the search.

use std::collections::BTreeMap;

use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    pub max_evals: usize,
    /// Jones' ε in `f_j - K d_j <= f_min - ε|f_min|`.
    pub balance: f64,
    /// Penalty weight for constraint violation.
    pub penalty: f64,
    /// Stop as soon as a feasible value strictly below this is seen.
    pub stop_below: Option<f64>,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            max_evals: 1000,
            balance: 1e-4,
            penalty: 1.0,
            stop_below: None,
        }
    }
}

/// Objective value and constraint value (`<= 0` means feasible).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub constraint: f64,
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    /// Best feasible point in box coordinates, if any feasible point was seen.
    pub best: Option<(Vec<f64>, f64)>,
    pub evaluations: usize,
    pub stopped_early: bool,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, Copy)]
pub struct CellSummary {
    pub value: f64,
    /// Center-to-corner distance in box coordinates.
    pub radius: f64,
}

impl DirectResult {
    /// `min_i (value_i - lipschitz * radius_i)`: a lower bound on the box
    /// minimum of any objective with that Lipschitz constant (Euclidean norm
    /// in box coordinates).
    pub fn lipschitz_floor(&self, lipschitz: f64) -> f64 {
        self.cells
            .iter()
            .map(|c| c.value - lipschitz * c.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn largest_radius(&self) -> f64 {
        self.cells.iter().map(|c| c.radius).fold(0.0, f64::max)
    }
}

struct Cell {
    center: Vec<f64>,
    levels: Vec<u32>,
    sample: Sample,
}

impl Cell {
    /// Half-diagonal in unit-cube coordinates.
    fn size(&self) -> f64 {
        let mut sq: Vec<f64> = self.levels.iter().map(|&l| 9f64.powi(-(l as i32))).collect();
        sq.sort_by(f64::total_cmp);
        0.5 * sq.iter().sum::<f64>().sqrt()
    }

    fn min_level(&self) -> u32 {
        self.levels.iter().copied().min().unwrap_or(0)
    }
}

/// Minimize `f` over `[lo, hi]`.
pub fn minimize<F>(lo: &[f64], hi: &[f64], opts: &DirectOptions, f: F) -> DirectResult
where
    F: Fn(&[f64]) -> Sample + Sync,
{
    let dim = lo.len();
    assert_eq!(dim, hi.len());
    let width: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let to_box = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(lo.iter().zip(&width))
            .map(|(ui, (l, w))| l + ui * w)
            .collect()
    };
    let box_radius = |cell: &Cell| -> f64 {
        0.5 * cell
            .levels
            .iter()
            .zip(&width)
            .map(|(&l, w)| (w * 3f64.powi(-(l as i32))).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let first = Cell {
        center: vec![0.5; dim],
        levels: vec![0; dim],
        sample: f(&to_box(&vec![0.5; dim])),
    };
    let mut cells = vec![first];
    let mut evals = 1usize;
    let mut stopped_early = below(opts, &cells[0].sample);

    while !stopped_early && dim > 0 && evals < opts.max_evals {
        let selected = select_potentially_optimal(&cells, opts);
        // Plan the batch; only whole cells that fit the remaining budget.
        let mut plan: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut batch_points: Vec<Vec<f64>> = Vec::new();
        for idx in selected {
            let cell = &cells[idx];
            let lmin = cell.min_level();
            let dims: Vec<usize> = (0..dim).filter(|&j| cell.levels[j] == lmin).collect();
            if evals + batch_points.len() + 2 * dims.len() > opts.max_evals {
                continue;
            }
            let delta = 3f64.powi(-(lmin as i32 + 1));
            for &j in &dims {
                for sign in [1.0, -1.0] {
                    let mut u = cell.center.clone();
                    u[j] += sign * delta;
                    batch_points.push(u);
                }
            }
            plan.push((idx, dims));
        }
        if plan.is_empty() {
            break;
        }
        let samples: Vec<Sample> = batch_points.par_iter().map(|u| f(&to_box(u))).collect();
        evals += samples.len();

        let mut offset = 0;
        for (idx, dims) in plan {
            let k = dims.len();
            let chunk = &samples[offset..offset + 2 * k];
            let points = &batch_points[offset..offset + 2 * k];
            offset += 2 * k;
            divide(&mut cells, idx, &dims, points, chunk);
        }
        stopped_early = samples.iter().any(|s| below(opts, s));
    }

    let best = cells
        .iter()
        .filter(|c| c.sample.constraint <= 0.0)
        .min_by(|a, b| a.sample.value.total_cmp(&b.sample.value))
        .map(|c| (to_box(&c.center), c.sample.value));
    let summaries = cells
        .iter()
        .map(|c| CellSummary {
            value: c.sample.value,
            radius: box_radius(c),
        })
        .collect();
    DirectResult {
        best,
        evaluations: evals,
        stopped_early,
        cells: summaries,
    }
}

fn below(opts: &DirectOptions, s: &Sample) -> bool {
    matches!(opts.stop_below, Some(t) if s.constraint <= 0.0 && s.value < t)
}

fn penalized(cells: &[Cell], penalty: f64) -> Vec<f64> {
    let feasible_max = cells
        .iter()
        .filter(|c| c.sample.constraint <= 0.0)
        .map(|c| c.sample.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let base = if feasible_max.is_finite() {
        feasible_max
    } else {
        cells.iter().map(|c| c.sample.value).fold(f64::NEG_INFINITY, f64::max)
    };
    cells
        .iter()
        .map(|c| {
            if c.sample.constraint <= 0.0 {
                c.sample.value
            } else {
                base + penalty * c.sample.constraint
            }
        })
        .collect()
}

fn select_potentially_optimal(cells: &[Cell], opts: &DirectOptions) -> Vec<usize> {
    let values = penalized(cells, opts.penalty);
    // Best cell per size class; ties go to the oldest cell.
    let mut groups: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        let key = c.size().to_bits();
        let entry = groups.entry(key).or_insert((values[i], i));
        if values[i] < entry.0 {
            *entry = (values[i], i);
        }
    }
    let reps: Vec<(f64, f64, usize)> = groups
        .iter()
        .map(|(k, &(v, i))| (f64::from_bits(*k), v, i))
        .collect();
    let f_min = reps.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    // Only sizes at or above the smallest cell achieving f_min can be optimal.
    let start = reps
        .iter()
        .rposition(|r| r.1 == f_min)
        .expect("at least one cell");
    let cand = &reps[start..];

    // Lower convex hull, left to right.
    let mut hull: Vec<usize> = Vec::new();
    for (j, p) in cand.iter().enumerate() {
        while hull.len() >= 2 {
            let a = &cand[hull[hull.len() - 2]];
            let b = &cand[hull[hull.len() - 1]];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    // Keep only the part of the hull whose slopes are positive: points after
    // the minimum value (the first hull point is the minimum).
    let target = f_min - opts.balance * f_min.abs();
    let mut out = Vec::new();
    for (h, &j) in hull.iter().enumerate() {
        let p = &cand[j];
        let accept = match hull.get(h + 1) {
            None => true,
            Some(&next) => {
                let q = &cand[next];
                let slope = (q.1 - p.1) / (q.0 - p.0);
                slope > 0.0 && p.1 - slope * p.0 <= target
            }
        };
        if accept {
            out.push(p.2);
        }
    }
    out
}

fn divide(cells: &mut Vec<Cell>, idx: usize, dims: &[usize], points: &[Vec<f64>], samples: &[Sample]) {
    // Order split dimensions by the best value found along them.
    let mut order: Vec<usize> = (0..dims.len()).collect();
    let score = |k: usize| {
        let (a, b) = (&samples[2 * k], &samples[2 * k + 1]);
        let fa = if a.constraint <= 0.0 { a.value } else { f64::INFINITY };
        let fb = if b.constraint <= 0.0 { b.value } else { f64::INFINITY };
        let feasible = fa.min(fb);
        (feasible, a.constraint.min(b.constraint))
    };
    order.sort_by(|&x, &y| {
        let (fx, gx) = score(x);
        let (fy, gy) = score(y);
        fx.total_cmp(&fy).then(gx.total_cmp(&gy)).then(x.cmp(&y))
    });
    let mut levels = cells[idx].levels.clone();
    for &k in &order {
        levels[dims[k]] += 1;
        for s in 0..2 {
            cells.push(Cell {
                center: points[2 * k + s].clone(),
                levels: levels.clone(),
                sample: samples[2 * k + s],
            });
        }
    }
    cells[idx].levels = levels;
}
