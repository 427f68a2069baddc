//! A-posteriori checks of a candidate that do not depend on the verifier:
//! exhaustive vertex enumeration, in-set Monte-Carlo sampling and a
//! brute-force grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::spectral::{lambda_min, xi, Matrix};
use crate::system::{closed_loop, Candidate};
use crate::uncertainty::UncertaintySet;
use crate::verifier::objective;

/// Largest box dimension accepted by [`grid_oracle`].
pub const GRID_MAX_DIM: usize = 4;

const SAMPLE_CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct Certificate {
    /// `worst >= -tol`.
    pub pass: bool,
    pub worst: f64,
    pub argmin: (Matrix, Matrix),
    pub evaluated: u64,
}

#[derive(Debug, Clone)]
pub struct GridMin {
    pub value: f64,
    pub argmin: (Matrix, Matrix),
    pub points: u64,
    /// Euclidean diameter of one grid cell in box coordinates.
    pub cell_diameter: f64,
}

/// Evaluate the objective at every vertex of an interval or polytopic set.
///
/// Interval vertices are walked in Gray-code order and the closed loop is
/// updated in place, one entry (or one row of `BK`) per step.
pub fn certify_vertices(cand: &Candidate, omega: &UncertaintySet, tol: f64) -> Result<Certificate> {
    let mut best: Option<(f64, Matrix, Matrix)> = None;
    let mut evaluated = 0u64;
    let mut consider = |v: f64, a: &Matrix, b: &Matrix| {
        evaluated += 1;
        if best.as_ref().is_none_or(|(w, _, _)| v < *w) {
            best = Some((v, a.clone(), b.clone()));
        }
    };
    match omega {
        UncertaintySet::Interval { .. } => {
            let mut stream = omega.vertex_stream()?;
            let mut a_cl: Option<Matrix> = None;
            while let Some(flip) = stream.advance() {
                let (a, b) = stream.current();
                match (flip, a_cl.as_mut()) {
                    (Some(f), Some(cl)) => {
                        let d = f.new - f.old;
                        if f.slot.in_b {
                            let mut row = cl.row_mut(f.slot.row);
                            row += cand.k.row(f.slot.col) * d;
                        } else {
                            cl[(f.slot.row, f.slot.col)] += d;
                        }
                    }
                    _ => a_cl = Some(closed_loop(a, b, &cand.k)?),
                }
                let cl = a_cl.as_ref().expect("set on the first vertex");
                let v = lambda_min(&xi(&cand.p, cl)?)?;
                consider(v, a, b);
            }
        }
        UncertaintySet::Polytope { vertices } => {
            for (a, b) in vertices {
                consider(objective(cand, a, b)?, a, b);
            }
        }
        UncertaintySet::Ellipsoid { .. } => {
            return Err(Error::InvalidState(
                "vertex certification needs an interval or polytopic set".into(),
            ))
        }
    }
    let (worst, a, b) = best.expect("every set has at least one vertex");
    Ok(Certificate {
        pass: worst >= -tol,
        worst,
        argmin: (a, b),
        evaluated,
    })
}

/// Minimum of the objective over `n_samples` random members of the set.
pub fn certify_sampled(
    cand: &Candidate,
    omega: &UncertaintySet,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<Certificate> {
    if n_samples == 0 {
        return Err(Error::Config("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Matrix, Matrix)> = None;
    let mut remaining = n_samples;
    while remaining > 0 {
        let take = remaining.min(SAMPLE_CHUNK);
        remaining -= take;
        let draws: Vec<(Matrix, Matrix)> = (0..take).map(|_| omega.sample(&mut rng)).collect();
        let values: Vec<f64> = draws
            .par_iter()
            .map(|(a, b)| objective(cand, a, b))
            .collect::<Result<_>>()?;
        for ((a, b), v) in draws.into_iter().zip(values) {
            if best.as_ref().is_none_or(|(w, _, _)| v < *w) {
                best = Some((v, a, b));
            }
        }
    }
    let (worst, a, b) = best.expect("n_samples >= 1");
    Ok(Certificate {
        pass: worst >= -tol,
        worst,
        argmin: (a, b),
        evaluated: n_samples as u64,
    })
}

/// Exhaustive grid over the box parameterization with spacing `resolution`
/// (a fraction of each side, endpoints included). Points outside the set are
/// skipped. Ties go to the lowest grid index.
pub fn grid_oracle(cand: &Candidate, omega: &UncertaintySet, resolution: f64) -> Result<GridMin> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config(format!("grid resolution must lie in (0, 1], got {resolution}")));
    }
    let bp = omega.box_param();
    let dim = bp.dim();
    if dim > GRID_MAX_DIM {
        return Err(dim_err(format!(
            "grid oracle supports at most {GRID_MAX_DIM} search dimensions, got {dim}"
        )));
    }
    let cells = (1.0 / resolution).ceil() as u64;
    let per_axis = cells + 1;
    let total = per_axis.pow(dim as u32);
    let point = |mut idx: u64| -> Vec<f64> {
        (0..dim)
            .map(|j| {
                let i = idx % per_axis;
                idx /= per_axis;
                bp.lo[j] + (bp.hi[j] - bp.lo[j]) * (i as f64 / cells as f64)
            })
            .collect()
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let z = point(idx);
            if bp.constraint(&z) > 0.0 {
                return None;
            }
            let (a, b) = bp.decode(&z);
            let v = objective(cand, &a, &b).expect("decoded pairs are conformable");
            Some((v, idx))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let (value, idx) = best.ok_or_else(|| Error::InvalidState("no grid point lies in the set".into()))?;
    let cell_diameter = bp
        .lo
        .iter()
        .zip(&bp.hi)
        .map(|(l, h)| ((h - l) / cells as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(GridMin {
        value,
        argmin: bp.decode(&point(idx)),
        points: total,
        cell_diameter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SymMatrix, Vector};
    use rand::Rng;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    /// `AᵀPA - P = -Q` via `(I - Aᵀ⊗Aᵀ) vec(P) = vec(Q)`.
    fn dlyap(a: &Matrix, q: &Matrix) -> Matrix {
        let n = a.nrows();
        let at = a.transpose();
        let lhs = Matrix::identity(n * n, n * n) - at.kronecker(&at);
        let sol = lhs.lu().solve(&Vector::from_column_slice(q.as_slice())).unwrap();
        Matrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn toy_violation_found_at_correct_corner() {
        // Two uncertain entries: A[0,0] ∈ [0, 1.2], B[1,0] ∈ [0.5, 1].
        let a_lo = m(2, 2, &[0.0, 0.1, 0.0, 0.2]);
        let a_hi = m(2, 2, &[1.2, 0.1, 0.0, 0.2]);
        let b_lo = m(2, 1, &[0.0, 0.5]);
        let b_hi = m(2, 1, &[0.0, 1.0]);
        let omega = UncertaintySet::interval(a_lo.clone(), a_hi.clone(), b_lo.clone(), b_hi.clone()).unwrap();
        let cand = Candidate::new(SymMatrix::identity(2), m(1, 2, &[0.0, -0.4])).unwrap();
        let cert = certify_vertices(&cand, &omega, 1e-9).unwrap();
        assert_eq!(cert.evaluated, 4);

        let mut corners = Vec::new();
        for (a, b) in [(&a_lo, &b_lo), (&a_lo, &b_hi), (&a_hi, &b_lo), (&a_hi, &b_hi)] {
            let a_cl = a + b * &cand.k;
            let big = Matrix::from_fn(4, 4, |r, c| match (r < 2, c < 2) {
                (true, true) | (false, false) => if r % 2 == c % 2 { 1.0 } else { 0.0 },
                (true, false) => a_cl[(c - 2, r)],
                (false, true) => a_cl[(r - 2, c)],
            });
            corners.push((big.symmetric_eigenvalues().min(), a.clone(), b.clone()));
        }
        let oracle = corners.iter().min_by(|x, y| x.0.total_cmp(&y.0)).unwrap();
        assert!(!cert.pass);
        assert!(cert.worst < 0.0);
        assert!((cert.worst - oracle.0).abs() < 1e-12);
        assert_eq!(cert.argmin.0, oracle.1);
        assert_eq!(cert.argmin.1, oracle.2);
    }

    #[test]
    fn incremental_closed_loop_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let n = 3;
            let a_lo = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.0));
            let a_hi = Matrix::from_fn(n, n, |r, c| a_lo[(r, c)] + if (r + c) % 2 == 0 { 0.3 } else { 0.0 });
            let b_lo = Matrix::from_fn(n, 2, |_, _| rng.random_range(-0.5..0.0));
            let b_hi = b_lo.map(|v| v + 0.2);
            let omega = UncertaintySet::interval(a_lo, a_hi, b_lo, b_hi).unwrap();
            let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let cand = Candidate::new(
                SymMatrix::new(&g * g.transpose() + Matrix::identity(n, n)).unwrap(),
                Matrix::from_fn(2, n, |_, _| rng.random_range(-1.0..1.0)),
            )
            .unwrap();
            let cert = certify_vertices(&cand, &omega, 0.0).unwrap();
            let direct = omega
                .vertex_stream()
                .unwrap()
                .map(|(a, b)| objective(&cand, &a, &b).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(cert.evaluated, 1 << 11);
            assert!((cert.worst - direct).abs() < 1e-10);
            assert!((objective(&cand, &cert.argmin.0, &cert.argmin.1).unwrap() - cert.worst).abs() < 1e-10);
        }
    }

    #[test]
    fn lyapunov_solution_passes_on_singleton() {
        let a = m(2, 2, &[0.5, 0.3, -0.2, 0.4]);
        let b = m(2, 1, &[0.0, 1.0]);
        let k = m(1, 2, &[0.1, -0.2]);
        let p = SymMatrix::new(dlyap(&(&a + &b * &k), &Matrix::identity(2, 2))).unwrap();
        let cand = Candidate::new(p, k).unwrap();
        let omega = UncertaintySet::singleton(a, b).unwrap();
        let cert = certify_vertices(&cand, &omega, 0.0).unwrap();
        assert!(cert.pass && cert.worst > 0.0);
        assert_eq!(cert.evaluated, 1);
        let sampled = certify_sampled(&cand, &omega, 1, 0, 0.0).unwrap();
        assert_eq!(sampled.worst, cert.worst);
    }

    #[test]
    fn ellipsoid_needs_sampling() {
        let omega = UncertaintySet::ellipsoid(
            Vector::from_column_slice(&[0.1]),
            SymMatrix::identity(1),
            m(1, 1, &[1.0]),
        )
        .unwrap();
        let cand = Candidate::new(SymMatrix::identity(1), m(1, 1, &[0.0])).unwrap();
        assert!(matches!(certify_vertices(&cand, &omega, 0.0), Err(Error::InvalidState(_))));
        assert!(certify_sampled(&cand, &omega, 0, 0, 0.0).is_err());
    }

    fn diag_interval(hi: f64) -> UncertaintySet {
        UncertaintySet::interval_fixed_b(Matrix::zeros(2, 2), m(2, 2, &[hi, 0.0, 0.0, 0.0]), Matrix::zeros(2, 1))
            .unwrap()
    }

    #[test]
    fn sampling_detects_violation_region() {
        // Objective 1 - a is negative on a third of [0, 1.5].
        let cand = Candidate::new(SymMatrix::identity(2), Matrix::zeros(1, 2)).unwrap();
        let cert = certify_sampled(&cand, &diag_interval(1.5), 10_000, 4, 1e-7).unwrap();
        assert!(!cert.pass);
        assert!(cert.worst < -0.4);
        assert_eq!(cert.evaluated, 10_000);
    }

    #[test]
    fn vertex_pass_implies_sampled_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut passes = 0;
        for _ in 0..20 {
            let a_lo = Matrix::from_fn(2, 2, |_, _| rng.random_range(-0.4..0.2));
            let a_hi = a_lo.map(|v| v + 0.2);
            let omega = UncertaintySet::interval_fixed_b(a_lo, a_hi, m(2, 1, &[0.0, 1.0])).unwrap();
            let cand = Candidate::new(
                SymMatrix::from_diagonal(&[1.0, rng.random_range(0.5..2.0)]).unwrap(),
                m(1, 2, &[rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)]),
            )
            .unwrap();
            let v = certify_vertices(&cand, &omega, 0.0).unwrap();
            let s = certify_sampled(&cand, &omega, 2000, 1, 0.0).unwrap();
            assert!(s.worst >= v.worst - 1e-12);
            if v.pass {
                passes += 1;
                assert!(s.pass);
            }
        }
        assert!(passes > 0);
    }

    #[test]
    fn grid_closed_form_and_guards() {
        let cand = Candidate::new(SymMatrix::identity(2), Matrix::zeros(1, 2)).unwrap();
        for h in [0.1, 0.01, 0.003] {
            let g = grid_oracle(&cand, &diag_interval(1.0), h).unwrap();
            assert!(g.value >= -1e-15 && g.value <= h);
            assert!((g.cell_diameter - 1.0 / (1.0 / h).ceil()).abs() < 1e-15);
        }
        let single = UncertaintySet::singleton(m(2, 2, &[0.3, 0.0, 0.0, 0.0]), Matrix::zeros(2, 1)).unwrap();
        let g = grid_oracle(&cand, &single, 0.5).unwrap();
        assert_eq!(g.points, 1);
        assert!((g.value - 0.7).abs() < 1e-12);

        let wide = UncertaintySet::interval_fixed_b(Matrix::zeros(3, 3), Matrix::identity(3, 3).add_scalar(0.1), Matrix::zeros(3, 1))
            .unwrap();
        let cand3 = Candidate::new(SymMatrix::identity(3), Matrix::zeros(1, 3)).unwrap();
        assert!(matches!(grid_oracle(&cand3, &wide, 0.5), Err(Error::Dimension(_))));
        assert!(grid_oracle(&cand, &single, 0.0).is_err());
    }

    #[test]
    fn grid_skips_points_outside_ellipsoid() {
        let omega = UncertaintySet::ellipsoid(
            Vector::from_column_slice(&[0.0]),
            SymMatrix::from_diagonal(&[4.0]).unwrap(),
            m(1, 1, &[1.0]),
        )
        .unwrap();
        let cand = Candidate::new(SymMatrix::identity(1), m(1, 1, &[0.0])).unwrap();
        // a ∈ [-0.5, 0.5]; objective 1 - |a|.
        let g = grid_oracle(&cand, &omega, 0.01).unwrap();
        assert!((g.value - 0.5).abs() < 1e-12);
        assert!(omega.contains(&g.argmin.0, &g.argmin.1, 1e-12).unwrap());
    }
}
