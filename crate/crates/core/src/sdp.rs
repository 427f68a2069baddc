//! Primal log-barrier method for small dense LMI programs:
//!
//! ```text
//! maximize  cᵀx   s.t.  F_j(x) = F_j0 + sum_k x_k F_jk ≻ 0,   g_i(x) = g_i0 + a_iᵀx > 0
//! ```
//!
//! Callers supply a strictly feasible start. Each outer round minimizes
//! `-τ cᵀx - sum log det F_j - sum log g_i` by damped Newton, then grows `τ`.
//! After a round the suboptimality is at most `θ / τ`, where `θ` is the sum of
//! the LMI orders plus the number of scalar constraints.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::spectral::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct Lmi {
    pub f0: Matrix,
    /// One coefficient matrix per variable; `None` for zero.
    pub coeffs: Vec<Option<Matrix>>,
}

impl Lmi {
    fn eval(&self, x: &Vector) -> Matrix {
        let mut f = self.f0.clone();
        for (k, c) in self.coeffs.iter().enumerate() {
            if let Some(c) = c {
                if x[k] != 0.0 {
                    f += c * x[k];
                }
            }
        }
        f
    }
}

#[derive(Debug, Clone)]
pub struct LinearIneq {
    pub g0: f64,
    pub a: Vec<(usize, f64)>,
}

impl LinearIneq {
    fn eval(&self, x: &Vector) -> f64 {
        self.g0 + self.a.iter().map(|(k, v)| x[*k] * v).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct BarrierProblem {
    pub objective: Vector,
    pub lmis: Vec<Lmi>,
    pub linear: Vec<LinearIneq>,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop once the certified suboptimality `θ/τ` drops below this.
    pub gap_tol: f64,
    pub tau0: f64,
    pub growth: f64,
    pub max_newton_per_round: usize,
    pub max_rounds: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            gap_tol: 1e-10,
            tau0: 1.0,
            growth: 10.0,
            max_newton_per_round: 200,
            max_rounds: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: Vector,
    pub value: f64,
    pub gap_bound: f64,
    pub newton_steps: usize,
}

impl BarrierProblem {
    fn theta(&self) -> f64 {
        self.lmis.iter().map(|l| l.f0.nrows()).sum::<usize>() as f64 + self.linear.len() as f64
    }

    /// Barrier value, or `None` outside the strict interior.
    fn barrier(&self, x: &Vector) -> Option<f64> {
        let mut phi = 0.0;
        for lmi in &self.lmis {
            let ch = Cholesky::new(lmi.eval(x))?;
            phi -= 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        for g in &self.linear {
            let v = g.eval(x);
            if v.is_nan() || v <= 0.0 {
                return None;
            }
            phi -= v.ln();
        }
        phi.is_finite().then_some(phi)
    }

    fn derivatives(&self, x: &Vector, tau: f64) -> Option<(Vector, Matrix)> {
        let dim = x.len();
        let mut grad = -&self.objective * tau;
        let mut hess = Matrix::zeros(dim, dim);
        for lmi in &self.lmis {
            let ch = Cholesky::new(lmi.eval(x))?;
            let l = ch.l();
            // U_k = L⁻¹ F_k L⁻ᵀ; ∂φ/∂x_k = -tr U_k, ∂²φ/∂x_k∂x_l = <U_k, U_l>.
            let mut us: Vec<(usize, Matrix)> = Vec::new();
            for (k, c) in lmi.coeffs.iter().enumerate() {
                if let Some(c) = c {
                    let left = l.solve_lower_triangular(c)?;
                    let u = l.solve_lower_triangular(&left.transpose())?;
                    grad[k] -= u.trace();
                    us.push((k, u));
                }
            }
            for (i, (ki, ui)) in us.iter().enumerate() {
                for (kj, uj) in &us[i..] {
                    let v = ui.dot(uj);
                    hess[(*ki, *kj)] += v;
                    if ki != kj {
                        hess[(*kj, *ki)] += v;
                    }
                }
            }
        }
        for g in &self.linear {
            let v = g.eval(x);
            for (k, ak) in &g.a {
                grad[*k] -= ak / v;
                for (l, al) in &g.a {
                    hess[(*k, *l)] += ak * al / (v * v);
                }
            }
        }
        Some((grad, hess))
    }

    pub fn solve(&self, start: Vector, opts: &BarrierOptions) -> Result<BarrierSolution> {
        let mut x = start;
        if self.barrier(&x).is_none() {
            return Err(Error::InvalidState("barrier start point is not strictly feasible".into()));
        }
        let theta = self.theta();
        let mut tau = opts.tau0;
        let mut newton_steps = 0;
        for _ in 0..opts.max_rounds {
            self.center(&mut x, tau, opts, &mut newton_steps)?;
            if theta / tau <= opts.gap_tol {
                return Ok(BarrierSolution {
                    value: self.objective.dot(&x),
                    x,
                    gap_bound: theta / tau,
                    newton_steps,
                });
            }
            tau *= opts.growth;
        }
        Err(Error::SolverStalled(format!(
            "gap bound {:.3e} after {} rounds",
            theta / tau,
            opts.max_rounds
        )))
    }

    fn center(&self, x: &mut Vector, tau: f64, opts: &BarrierOptions, steps: &mut usize) -> Result<()> {
        let merit = |y: &Vector| self.barrier(y).map(|phi| phi - tau * self.objective.dot(y));
        for _ in 0..opts.max_newton_per_round {
            *steps += 1;
            let (grad, hess) = self
                .derivatives(x, tau)
                .ok_or_else(|| Error::SolverStalled("iterate left the interior".into()))?;
            let step = newton_direction(&hess, &grad)
                .ok_or_else(|| Error::SolverStalled("singular barrier Hessian".into()))?;
            let decrement = -grad.dot(&step);
            if !decrement.is_finite() {
                return Err(Error::SolverStalled("non-finite Newton decrement".into()));
            }
            // λ²/2 below 1e-9 is well inside the quadratic-convergence region;
            // tighter targets only chase rounding noise at large τ.
            if decrement <= 1e-8 {
                return Ok(());
            }
            let f0 = merit(x).expect("current iterate is interior");
            let mut alpha = 1.0;
            loop {
                let trial = &*x + &step * alpha;
                if let Some(f) = merit(&trial) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        *x = trial;
                        if f0 - f <= 64.0 * f64::EPSILON * f0.abs().max(1.0) {
                            // Progress has reached the rounding floor of the merit.
                            return Ok(());
                        }
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    // No measurable progress is possible at this precision.
                    return Ok(());
                }
            }
        }
        Err(Error::SolverStalled(format!(
            "Newton centering did not converge in {} steps",
            opts.max_newton_per_round
        )))
    }
}

fn newton_direction(hess: &Matrix, grad: &Vector) -> Option<Vector> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let h = hess + Matrix::identity(hess.nrows(), hess.ncols()) * reg;
        if let Some(ch) = Cholesky::new(h) {
            let d = ch.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { scale * 1e-14 } else { reg * 100.0 };
    }
    None
}
