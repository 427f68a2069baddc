//! Problem definition and closed-loop helpers.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::spectral::{inverse_spd, lambda_min, op_norm, Matrix, SymMatrix, Vector};
use crate::uncertainty::UncertaintySet;

pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_ETA: f64 = 1e3;
pub const DEFAULT_W_MAX: f64 = 1e3;
pub const DEFAULT_N_T: usize = 3;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_REFINE_STEPS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;

/// Evaluation limits for one verifier call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierBudget {
    /// DIRECT evaluations; `None` means `2000 * dim`, capped at 10⁶.
    pub max_evals: Option<usize>,
    /// Step cap for each local sensitivity descent.
    pub refine_steps: usize,
}

impl Default for VerifierBudget {
    fn default() -> Self {
        VerifierBudget {
            max_evals: None,
            refine_steps: DEFAULT_REFINE_STEPS,
        }
    }
}

impl VerifierBudget {
    pub fn evals_for_dim(&self, dim: usize) -> usize {
        self.max_evals
            .unwrap_or_else(|| (2000 * dim).min(1_000_000))
            .max(1)
    }
}

/// Everything one synthesis run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub omega: UncertaintySet,
    pub eps: f64,
    pub eta: f64,
    /// Half-width of the entrywise box constraining `W`.
    pub w_max: f64,
    pub initial_sample: Option<(Matrix, Matrix)>,
    /// The verifier accepts a candidate when its estimate of the minimum is
    /// at least this value; `eps / 2` by default.
    pub accept_threshold: f64,
    pub max_iters: usize,
    pub verifier_budget: VerifierBudget,
    /// Sensitivity-based attempts before falling back to the global search.
    pub n_t: usize,
    pub seed: u64,
    /// Drop counter-examples interior to the hull of the others before solving.
    pub vertex_filter: bool,
    /// Scale each learner solution so its margin equals `eps` exactly.
    pub normalize_margin: bool,
}

impl ProblemSpec {
    /// Spec with every optional setting at its default.
    pub fn new(omega: UncertaintySet) -> Self {
        ProblemSpec {
            omega,
            eps: DEFAULT_EPS,
            eta: DEFAULT_ETA,
            w_max: DEFAULT_W_MAX,
            initial_sample: None,
            accept_threshold: DEFAULT_EPS / 2.0,
            max_iters: DEFAULT_MAX_ITERS,
            verifier_budget: VerifierBudget::default(),
            n_t: DEFAULT_N_T,
            seed: DEFAULT_SEED,
            vertex_filter: true,
            normalize_margin: true,
        }
    }

    /// Set `eps` and `eta`, resetting the threshold to `eps / 2`.
    pub fn with_bounds(mut self, eps: f64, eta: f64) -> Self {
        self.eps = eps;
        self.eta = eta;
        self.accept_threshold = eps / 2.0;
        self
    }

    pub fn n(&self) -> usize {
        self.omega.n()
    }

    pub fn m(&self) -> usize {
        self.omega.m()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return cfg(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.eta >= self.eps && self.eta.is_finite()) {
            return cfg(format!("eta ({}) must be at least eps ({})", self.eta, self.eps));
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return cfg(format!("w_max must be positive, got {}", self.w_max));
        }
        let t = self.accept_threshold;
        if !(t >= 0.0 && t <= self.eps / 2.0) {
            return cfg(format!("accept_threshold must lie in [0, eps/2], got {t}"));
        }
        if self.max_iters == 0 {
            return cfg("max_iters must be positive".into());
        }
        if self.verifier_budget.max_evals == Some(0) {
            return cfg("verifier budget must be positive".into());
        }
        if let Some((a, b)) = &self.initial_sample {
            if !self.omega.contains(a, b, 1e-9)? {
                return cfg("initial sample is not a member of the uncertainty set".into());
            }
        }
        Ok(())
    }

    /// The first counter-example: the configured sample or the set's representative.
    pub fn first_sample(&self) -> (Matrix, Matrix) {
        self.initial_sample
            .clone()
            .unwrap_or_else(|| self.omega.representative())
    }
}

/// Quadratic Lyapunov matrix `P` and feedback gain `K` (`u = Kx`).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub p: SymMatrix,
    pub k: Matrix,
}

impl Candidate {
    pub fn new(p: SymMatrix, k: Matrix) -> Result<Self> {
        if k.ncols() != p.order() || k.nrows() == 0 {
            return Err(dim_err(format!(
                "K is {}x{} but P has order {}",
                k.nrows(),
                k.ncols(),
                p.order()
            )));
        }
        crate::spectral::check_finite(&k)?;
        if lambda_min(&p)? <= 0.0 {
            return Err(Error::NotSpd);
        }
        Ok(Candidate { p, k })
    }

    pub fn n(&self) -> usize {
        self.p.order()
    }

    pub fn m(&self) -> usize {
        self.k.nrows()
    }

    /// Candidate `(X⁻¹, W X⁻¹)` built from learner variables.
    pub fn from_learner(x: &SymMatrix, w: &Matrix) -> Result<Self> {
        let p = inverse_spd(x)?;
        let k = w * p.as_matrix();
        Candidate::new(p, k)
    }

    pub fn k_norm(&self) -> f64 {
        op_norm(&self.k).unwrap_or(f64::INFINITY)
    }
}

/// `A + B K`.
pub fn closed_loop(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || k.nrows() != b.ncols() || k.ncols() != n {
        return Err(dim_err(format!(
            "A {:?}, B {:?}, K {:?} are not conformable",
            a.shape(),
            b.shape(),
            k.shape()
        )));
    }
    Ok(a + b * k)
}

/// `xᵀ((A+BK)ᵀ P (A+BK) - P) x`, the one-step change of `V(x) = xᵀPx`.
pub fn lyapunov_decrease(p: &SymMatrix, a: &Matrix, b: &Matrix, k: &Matrix, x: &Vector) -> Result<f64> {
    let a_cl = closed_loop(a, b, k)?;
    if p.order() != a.nrows() || x.len() != a.nrows() {
        return Err(dim_err("P and x must match the state dimension"));
    }
    let next = &a_cl * x;
    Ok(next.dot(&(p.as_matrix() * &next)) - x.dot(&(p.as_matrix() * x)))
}
