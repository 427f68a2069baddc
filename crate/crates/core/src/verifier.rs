//! Falsification of a candidate: global minimization of
//! `λ_min(Ξ(A + BK))` over the uncertainty set.
//!
//! [`verify`] first tries a few cheap projected-gradient descents from random
//! members of the set and only then runs the DIRECT search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::direct::{self, DirectOptions, Sample};
use crate::error::{dim_err, Result};
use crate::spectral::{lambda_min, min_eigenpair, op_norm, xi, Matrix};
use crate::system::{closed_loop, Candidate, ProblemSpec, VerifierBudget};
use crate::uncertainty::{BoxParam, UncertaintySet};

/// Below this eigenvalue gap the analytic gradient is replaced by central
/// differences.
pub const EIG_GAP_TOL: f64 = 1e-8;
/// Relative step of the finite-difference fallback.
pub const FD_STEP: f64 = 1e-6;
/// Jones' balance parameter.
pub const DIRECT_BALANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMethod {
    Global,
    Sensitivity,
}

#[derive(Debug, Clone)]
pub struct VerifierResult {
    /// Smallest objective value found.
    pub lambda_hat: f64,
    /// Member of the set attaining `lambda_hat`.
    pub minimizer: (Matrix, Matrix),
    pub method: VerifyMethod,
    pub evaluations: usize,
    /// The global search used its whole budget and found nothing below the
    /// threshold.
    pub certified: bool,
    /// Lipschitz lower bound on the minimum over the search box, when the
    /// parameterization is affine.
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBudget {
    /// With respect to `ΔA_cl`, operator norm.
    pub ell_cl: f64,
    /// With respect to `(ΔA, ΔB)`.
    pub ell_ab: f64,
    pub safe_radius: f64,
}

/// Constants implied by the learner bounds `εI ⪯ X ⪯ ηI`.
pub fn lipschitz_budget(cand: &Candidate, spec: &ProblemSpec) -> LipschitzBudget {
    let ell_cl = 1.0 / spec.eps;
    LipschitzBudget {
        ell_cl,
        ell_ab: ell_cl * cand.k_norm().max(1.0),
        safe_radius: (spec.eps / spec.eta).powi(2),
    }
}

/// Lipschitz constant of the objective in Euclidean box coordinates for
/// this specific candidate: `‖P‖ · ‖[I; K]‖`.
pub fn candidate_lipschitz(cand: &Candidate) -> f64 {
    let p = op_norm(cand.p.as_matrix()).unwrap_or(f64::INFINITY);
    p * (1.0 + cand.k_norm().powi(2)).sqrt()
}

/// `λ_min(Ξ(A + BK))` for the candidate's `P`.
pub fn objective(cand: &Candidate, a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.nrows() != cand.n() || b.ncols() != cand.m() {
        return Err(dim_err(format!(
            "candidate is {}x{} but (A, B) are {:?}, {:?}",
            cand.n(),
            cand.m(),
            a.shape(),
            b.shape()
        )));
    }
    let a_cl = closed_loop(a, b, &cand.k)?;
    lambda_min(&xi(&cand.p, &a_cl)?)
}

/// Objective value and gradient with respect to the box coordinates.
pub fn objective_gradient(cand: &Candidate, bp: &BoxParam, z: &[f64]) -> Result<(f64, Vec<f64>, usize)> {
    let (a, b) = bp.decode(z);
    let a_cl = closed_loop(&a, &b, &cand.k)?;
    let pair = min_eigenpair(&xi(&cand.p, &a_cl)?)?;
    let n = cand.n();
    if pair.gap > EIG_GAP_TOL {
        // dλ/dA_cl = 2 P v₂ v₁ᵀ for v = [v₁; v₂].
        let v1 = pair.vector.rows(0, n).into_owned();
        let v2 = pair.vector.rows(n, n).into_owned();
        let g_cl = (cand.p.as_matrix() * v2) * v1.transpose() * 2.0;
        let g_b = &g_cl * cand.k.transpose();
        return Ok((pair.value, bp.pullback(z, &g_cl, &g_b), 1));
    }
    let mut grad = vec![0.0; z.len()];
    let mut evals = 1;
    for j in 0..z.len() {
        let h = FD_STEP * (bp.hi[j] - bp.lo[j]).max(z[j].abs()).max(1e-8);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[j] += h;
        zm[j] -= h;
        let (ap, bpp) = bp.decode(&zp);
        let (am, bm) = bp.decode(&zm);
        grad[j] = (objective(cand, &ap, &bpp)? - objective(cand, &am, &bm)?) / (2.0 * h);
        evals += 2;
    }
    Ok((pair.value, grad, evals))
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub z: Vec<f64>,
    pub value: f64,
    pub steps: usize,
    pub evaluations: usize,
}

/// Projected steepest descent in box-normalized coordinates, starting from
/// `z0` (which must decode into the set). Only strict decreases are
/// accepted, so the returned value never exceeds the start value.
pub fn sensitivity_refine_z(cand: &Candidate, bp: &BoxParam, z0: &[f64], max_steps: usize) -> Result<Refined> {
    let width: Vec<f64> = bp.lo.iter().zip(&bp.hi).map(|(l, h)| h - l).collect();
    let eval = |z: &[f64]| -> Result<f64> {
        let (a, b) = bp.decode(z);
        objective(cand, &a, &b)
    };
    let mut z = z0.to_vec();
    let mut value = eval(&z)?;
    let mut evaluations = 1;
    let mut alpha: f64 = 0.25;
    let mut steps = 0;
    while steps < max_steps && !z.is_empty() {
        steps += 1;
        let (_, grad, used) = objective_gradient(cand, bp, &z)?;
        evaluations += used;
        let scaled: Vec<f64> = grad.iter().zip(&width).map(|(g, w)| g * w).collect();
        let norm = scaled.iter().map(|s| s * s).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            break;
        }
        let mut improved = false;
        while alpha >= 1e-10 {
            let mut trial: Vec<f64> = z
                .iter()
                .zip(scaled.iter().zip(&width))
                .map(|(zj, (s, w))| zj - alpha * w * s / norm)
                .collect();
            bp.project(&mut trial);
            let predicted: f64 = grad.iter().zip(z.iter().zip(&trial)).map(|(g, (a, b))| g * (a - b)).sum();
            let v = eval(&trial)?;
            evaluations += 1;
            if v < value - 1e-4 * predicted.max(0.0) {
                let moved = z.iter().zip(&trial).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                z = trial;
                value = v;
                improved = moved > 0.0;
                alpha = (alpha * 2.0).min(1.0);
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(Refined {
        z,
        value,
        steps,
        evaluations,
    })
}

/// Local descent from `start`, returning the reached member and its value.
pub fn sensitivity_refine(
    cand: &Candidate,
    omega: &UncertaintySet,
    start: (&Matrix, &Matrix),
    max_steps: usize,
) -> Result<((Matrix, Matrix), f64)> {
    let bp = omega.box_param();
    let z0 = bp.encode(start.0, start.1);
    let r = sensitivity_refine_z(cand, &bp, &z0, max_steps)?;
    let point = if r.z == z0 {
        (start.0.clone(), start.1.clone())
    } else {
        bp.decode(&r.z)
    };
    let value = if r.z == z0 { objective(cand, start.0, start.1)? } else { r.value };
    Ok((point, value))
}

/// DIRECT over the box parameterization, with a final local polish.
pub fn global_minimize(
    cand: &Candidate,
    omega: &UncertaintySet,
    budget: &VerifierBudget,
    threshold: f64,
) -> Result<VerifierResult> {
    let bp = omega.box_param();
    let (a0, b0) = omega.representative();
    objective(cand, &a0, &b0)?;

    let ell = candidate_lipschitz(cand);
    let penalty = match bp.constraint_gradient_floor() {
        Some(floor) => 10.0 * ell / floor,
        None => 1.0,
    };
    let opts = DirectOptions {
        max_evals: budget.evals_for_dim(bp.dim()),
        balance: DIRECT_BALANCE,
        penalty,
        stop_below: Some(threshold),
    };
    let res = direct::minimize(&bp.lo, &bp.hi, &opts, |z| {
        let (a, b) = bp.decode(z);
        Sample {
            value: objective(cand, &a, &b).expect("decoded pairs are conformable and finite"),
            constraint: bp.constraint(z),
        }
    });
    let (z_best, v_best) = res.best.clone().expect("the box center is always a member");
    let polished = if bp.dim() == 0 {
        Refined { z: z_best, value: v_best, steps: 0, evaluations: 0 }
    } else {
        sensitivity_refine_z(cand, &bp, &z_best, budget.refine_steps)?
    };
    let lambda_hat = polished.value;
    let lower_bound = (!bp.slots().is_empty() || bp.dim() == 0).then(|| res.lipschitz_floor(ell).min(lambda_hat));
    let ran_to_budget = !res.stopped_early;
    Ok(VerifierResult {
        lambda_hat,
        minimizer: bp.decode(&polished.z),
        method: VerifyMethod::Global,
        evaluations: res.evaluations + polished.evaluations,
        certified: ran_to_budget && lambda_hat >= threshold,
        lower_bound,
    })
}

/// Up to `n_t` local attempts from random members, then the global search.
pub fn verify(cand: &Candidate, spec: &ProblemSpec, seed: u64) -> Result<VerifierResult> {
    let bp = spec.omega.box_param();
    let threshold = spec.accept_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = 0;
    for _ in 0..spec.n_t {
        let (a, b) = spec.omega.sample(&mut rng);
        let z0 = bp.encode(&a, &b);
        let r = sensitivity_refine_z(cand, &bp, &z0, spec.verifier_budget.refine_steps)?;
        evaluations += r.evaluations;
        if r.value < threshold {
            let minimizer = if r.z == z0 { (a, b) } else { bp.decode(&r.z) };
            return Ok(VerifierResult {
                lambda_hat: r.value,
                minimizer,
                method: VerifyMethod::Sensitivity,
                evaluations,
                certified: false,
                lower_bound: None,
            });
        }
    }
    let mut res = global_minimize(cand, &spec.omega, &spec.verifier_budget, threshold)?;
    res.evaluations += evaluations;
    Ok(res)
}
