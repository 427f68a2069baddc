//! LMI learner.
//!
//! Given sample pairs `(Â_h, B̂_h)`, find `X`, `W` and the largest margin `t`
//! such that
//!
//! ```text
//! [[X, XÂ_hᵀ + WᵀB̂_hᵀ], [Â_hX + B̂_hW, X]] ⪰ tI   for every h,
//! X ⪯ ηI,   |W_ij| <= w_max.
//! ```
//!
//! The sampled problem is feasible with bound `ε` exactly when the optimal
//! margin is at least `ε`, so the margin doubles as the feasibility test.
//! Internally the variables are divided by `η` (the constraints are
//! homogeneous) so the barrier iterates stay O(1).

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::sdp::{BarrierOptions, BarrierProblem, LinearIneq, Lmi};
use crate::spectral::{lambda_min, Matrix, SymMatrix, Vector};
use crate::system::Candidate;

pub const DEFAULT_FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LearnerProblem {
    pub vertices: Vec<(Matrix, Matrix)>,
    pub eps: f64,
    pub eta: f64,
    pub w_max: f64,
    /// Relative tolerance on the margin test `t* >= eps`.
    pub feas_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LearnerSolution {
    pub status: LearnerStatus,
    pub x: SymMatrix,
    pub w: Matrix,
    /// Optimal margin `t*` (for [`normalized`](Self::normalized) solutions,
    /// the margin after scaling).
    pub margin: f64,
    pub newton_steps: usize,
}

impl LearnerProblem {
    pub fn new(vertices: Vec<(Matrix, Matrix)>, eps: f64, eta: f64, w_max: f64) -> Self {
        LearnerProblem {
            vertices,
            eps,
            eta,
            w_max,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let (a0, b0) = self
            .vertices
            .first()
            .ok_or_else(|| Error::InvalidState("learner needs at least one sample".into()))?;
        let (n, m) = (a0.nrows(), b0.ncols());
        for (a, b) in &self.vertices {
            if a.shape() != (n, n) || b.shape() != (n, m) {
                return Err(dim_err("learner samples have inconsistent shapes"));
            }
        }
        Ok((n, m))
    }

    /// Maximize the margin; `Feasible` iff it reaches `eps`.
    pub fn solve(&self) -> Result<LearnerSolution> {
        if !(self.eta >= self.eps && self.eps > 0.0 && self.w_max > 0.0) {
            return Err(Error::Config("learner needs eta >= eps > 0 and w_max > 0".into()));
        }
        let (n, m) = self.dims()?;
        let layout = Layout { n, m };
        let w_box = self.w_max / self.eta;

        let mut lmis = Vec::with_capacity(self.vertices.len() + 1);
        for (a, b) in &self.vertices {
            lmis.push(layout.block_lmi(a, b));
        }
        lmis.push(layout.upper_bound_lmi());
        let mut linear = Vec::with_capacity(2 * n * m);
        for k in 0..n * m {
            let var = layout.w_offset() + k;
            linear.push(LinearIneq { g0: w_box, a: vec![(var, -1.0)] });
            linear.push(LinearIneq { g0: w_box, a: vec![(var, 1.0)] });
        }
        let mut objective = Vector::zeros(layout.len());
        objective[layout.t_index()] = 1.0;
        let problem = BarrierProblem { objective, lmis, linear };

        // X = I/2, W = 0 is interior for the bound constraints; put t safely
        // below every block's smallest eigenvalue.
        let x0 = SymMatrix::identity(n).scaled(0.5);
        let w0 = Matrix::zeros(m, n);
        let worst = self
            .vertices
            .iter()
            .map(|(a, b)| lambda_min(&block(&x0, &w0, a, b)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let start = layout.pack(&x0, &w0, worst - 1.0);

        let opts = BarrierOptions {
            gap_tol: self.feas_tol * 1e-3,
            ..BarrierOptions::default()
        };
        let sol = problem.solve(start, &opts)?;
        let (xs, ws, ts) = layout.unpack(&sol.x);
        let x = SymMatrix::new(xs.into_inner() * self.eta)?;
        let w = ws * self.eta;
        let margin = ts * self.eta;
        let status = if margin >= self.eps * (1.0 - self.feas_tol) {
            LearnerStatus::Feasible
        } else {
            LearnerStatus::Infeasible
        };
        Ok(LearnerSolution {
            status,
            x,
            w,
            margin,
            newton_steps: sol.newton_steps,
        })
    }
}

/// The learner block `[[X, XAᵀ + WᵀBᵀ], [AX + BW, X]]`.
pub fn block(x: &SymMatrix, w: &Matrix, a: &Matrix, b: &Matrix) -> SymMatrix {
    let n = x.order();
    let off = a * x.as_matrix() + b * w;
    let mut out = Matrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(x.as_matrix());
    out.view_mut((n, n), (n, n)).copy_from(x.as_matrix());
    out.view_mut((n, 0), (n, n)).copy_from(&off);
    out.view_mut((0, n), (n, n)).copy_from(&off.transpose());
    SymMatrix::new(out).expect("block of finite matrices is finite")
}

impl LearnerSolution {
    /// `(P, K) = (X⁻¹, W X⁻¹)`.
    pub fn extract_candidate(&self) -> Result<Candidate> {
        if self.status != LearnerStatus::Feasible {
            return Err(Error::InvalidState("no candidate from an infeasible learner problem".into()));
        }
        Candidate::from_learner(&self.x, &self.w)
    }

    /// Scale `(X, W)` down so the margin equals `eps`.
    ///
    /// The scaled pair still satisfies every learner constraint (the block
    /// constraints are homogeneous, and shrinking keeps `X ⪯ ηI` and the `W`
    /// box), and it yields the largest `P = X⁻¹` along the ray, which is what
    /// a threshold on `lambda_min(Xi)` measures.
    pub fn normalized(&self, eps: f64) -> LearnerSolution {
        if self.status != LearnerStatus::Feasible || self.margin <= eps {
            return self.clone();
        }
        let s = eps / self.margin;
        LearnerSolution {
            status: self.status,
            x: self.x.scaled(s),
            w: &self.w * s,
            margin: eps,
            newton_steps: self.newton_steps,
        }
    }

    /// Smallest eigenvalue of the block at each sample.
    pub fn block_margins(&self, vertices: &[(Matrix, Matrix)]) -> Result<Vec<f64>> {
        vertices
            .iter()
            .map(|(a, b)| lambda_min(&block(&self.x, &self.w, a, b)))
            .collect()
    }
}

/// Variable ordering: upper triangle of X (row-major), vec(W) column-major, t.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn x_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn w_offset(&self) -> usize {
        self.x_len()
    }

    fn t_index(&self) -> usize {
        self.x_len() + self.n * self.m
    }

    fn len(&self) -> usize {
        self.t_index() + 1
    }

    fn x_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i..self.n).map(move |j| (i, j)))
    }

    fn sym_unit(&self, i: usize, j: usize) -> Matrix {
        let mut e = Matrix::zeros(self.n, self.n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        e
    }

    fn pack(&self, x: &SymMatrix, w: &Matrix, t: f64) -> Vector {
        let mut v = Vector::zeros(self.len());
        for (k, (i, j)) in self.x_pairs().enumerate() {
            v[k] = x[(i, j)];
        }
        for (k, val) in w.iter().enumerate() {
            v[self.w_offset() + k] = *val;
        }
        v[self.t_index()] = t;
        v
    }

    fn unpack(&self, v: &Vector) -> (SymMatrix, Matrix, f64) {
        let mut x = Matrix::zeros(self.n, self.n);
        for (k, (i, j)) in self.x_pairs().enumerate() {
            x[(i, j)] = v[k];
            x[(j, i)] = v[k];
        }
        let w = Matrix::from_column_slice(self.m, self.n, &v.as_slice()[self.w_offset()..self.t_index()]);
        (SymMatrix::new(x).expect("finite barrier iterate"), w, v[self.t_index()])
    }

    fn block_lmi(&self, a: &Matrix, b: &Matrix) -> Lmi {
        let n = self.n;
        let mut coeffs = Vec::with_capacity(self.len());
        for (i, j) in self.x_pairs() {
            let e = self.sym_unit(i, j);
            let ae = a * &e;
            let mut c = Matrix::zeros(2 * n, 2 * n);
            c.view_mut((0, 0), (n, n)).copy_from(&e);
            c.view_mut((n, n), (n, n)).copy_from(&e);
            c.view_mut((n, 0), (n, n)).copy_from(&ae);
            c.view_mut((0, n), (n, n)).copy_from(&ae.transpose());
            coeffs.push(Some(c));
        }
        for col in 0..n {
            for row in 0..self.m {
                let mut e = Matrix::zeros(self.m, n);
                e[(row, col)] = 1.0;
                let be = b * e;
                if be.iter().all(|v| *v == 0.0) {
                    coeffs.push(None);
                    continue;
                }
                let mut c = Matrix::zeros(2 * n, 2 * n);
                c.view_mut((n, 0), (n, n)).copy_from(&be);
                c.view_mut((0, n), (n, n)).copy_from(&be.transpose());
                coeffs.push(Some(c));
            }
        }
        coeffs.push(Some(-Matrix::identity(2 * n, 2 * n)));
        Lmi {
            f0: Matrix::zeros(2 * n, 2 * n),
            coeffs,
        }
    }

    /// `I - X ⪰ 0` in normalized units.
    fn upper_bound_lmi(&self) -> Lmi {
        let mut coeffs: Vec<Option<Matrix>> = self.x_pairs().map(|(i, j)| Some(-self.sym_unit(i, j))).collect();
        coeffs.resize(self.len(), None);
        Lmi {
            f0: Matrix::identity(self.n, self.n),
            coeffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lambda_max, op_norm, xi};
    use crate::system::closed_loop;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    #[test]
    fn zero_vertex_margin_is_eta() {
        for eta in [1.0, 10.0, 1e3] {
            let prob = LearnerProblem::new(vec![(Matrix::zeros(2, 2), Matrix::zeros(2, 1))], 1e-3, eta, 10.0);
            let sol = prob.solve().unwrap();
            assert_eq!(sol.status, LearnerStatus::Feasible);
            assert!((sol.margin - eta).abs() <= 1e-7 * eta, "{} vs {eta}", sol.margin);
            assert!((sol.x.as_matrix() - Matrix::identity(2, 2) * eta).amax() < 1e-4 * eta);
        }
    }

    #[test]
    fn unstable_uncontrollable_scalar_is_infeasible() {
        // Block = [[X, 2X], [2X, X]] has eigenvalues 3X and -X, so the best
        // margin is 0 (at X = 0).
        for eps in [1e-3, 0.1] {
            for eta in [1.0, 100.0] {
                let prob = LearnerProblem::new(vec![(m(1, 1, &[2.0]), m(1, 1, &[0.0]))], eps, eta, 10.0);
                let sol = prob.solve().unwrap();
                assert_eq!(sol.status, LearnerStatus::Infeasible);
                assert!(sol.margin.abs() < 1e-6, "margin {}", sol.margin);
                assert!(sol.extract_candidate().is_err());
            }
        }
    }

    #[test]
    fn scalar_two_vertex_stabilization() {
        let verts = vec![(m(1, 1, &[-0.5]), m(1, 1, &[1.0])), (m(1, 1, &[0.5]), m(1, 1, &[1.0]))];
        let prob = LearnerProblem::new(verts.clone(), 1e-3, 1.0, 10.0);
        let sol = prob.solve().unwrap();
        assert_eq!(sol.status, LearnerStatus::Feasible);
        let cand = sol.extract_candidate().unwrap();
        for (a, b) in &verts {
            let cl = closed_loop(a, b, &cand.k).unwrap();
            assert!(cl[(0, 0)].abs() < 1.0);
        }
    }

    #[test]
    fn solution_certificates() {
        let verts = vec![
            (m(2, 2, &[1.1, 0.3, -0.2, 0.8]), m(2, 1, &[0.0, 1.0])),
            (m(2, 2, &[0.9, 0.5, -0.4, 1.0]), m(2, 1, &[0.1, 1.0])),
            (m(2, 2, &[1.2, 0.2, 0.1, 0.7]), m(2, 1, &[0.0, 0.9])),
        ];
        let (eps, eta, w_max) = (1e-2, 5.0, 20.0);
        let mut prob = LearnerProblem::new(verts.clone(), eps, eta, w_max);
        prob.feas_tol = DEFAULT_FEAS_TOL;
        let sol = prob.solve().unwrap();
        assert_eq!(sol.status, LearnerStatus::Feasible);
        let tol = 1e-6 * eta;
        let margins = sol.block_margins(&verts).unwrap();
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min_margin - sol.margin).abs() < tol);
        assert!(lambda_max(&sol.x).unwrap() <= eta + tol);
        assert!(sol.w.amax() <= w_max + tol);

        for s in [sol.clone(), sol.normalized(eps)] {
            let cand = s.extract_candidate().unwrap();
            assert!(lambda_min(&cand.p).unwrap() >= 1.0 / eta - 1e-9);
            assert!(op_norm(&cand.p).unwrap() <= 1.0 / eps * (1.0 + 1e-6));
            for (a, b) in &verts {
                let x = xi(&cand.p, &closed_loop(a, b, &cand.k).unwrap()).unwrap();
                assert!(lambda_min(&x).unwrap() >= eps / (eta * eta) - 1e-7);
            }
        }
        let normalized = sol.normalized(eps);
        assert!((normalized.margin - eps).abs() < 1e-15);
        let nm = normalized.block_margins(&verts).unwrap();
        assert!(nm.iter().all(|v| *v >= eps * (1.0 - 1e-6)));
    }

    #[test]
    fn adding_vertices_never_increases_margin() {
        let mut verts = vec![(m(2, 2, &[0.9, 0.2, 0.0, 0.8]), m(2, 1, &[0.0, 1.0]))];
        let mut last = f64::INFINITY;
        for extra in [
            m(2, 2, &[1.1, 0.2, 0.1, 0.8]),
            m(2, 2, &[0.9, 0.4, -0.1, 1.2]),
            m(2, 2, &[1.3, -0.2, 0.3, 0.6]),
        ] {
            let sol = LearnerProblem::new(verts.clone(), 1e-3, 10.0, 50.0).solve().unwrap();
            assert!(sol.margin <= last + 1e-6);
            last = sol.margin;
            verts.push((extra, m(2, 1, &[0.0, 1.0])));
        }
    }

    #[test]
    fn bad_config_rejected() {
        let prob = LearnerProblem::new(vec![(Matrix::zeros(1, 1), Matrix::zeros(1, 1))], 1.0, 0.5, 1.0);
        assert!(matches!(prob.solve(), Err(Error::Config(_))));
        let empty = LearnerProblem::new(vec![], 1e-3, 1.0, 1.0);
        assert!(empty.solve().is_err());
    }
}
