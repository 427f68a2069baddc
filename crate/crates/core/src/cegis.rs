//! The learner/verifier loop.

use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counterexamples::{CounterexampleSet, DEFAULT_DEDUP_TOL};
use crate::error::{Error, Result};
use crate::learner::{LearnerProblem, LearnerStatus};
use crate::spectral::Matrix;
use crate::system::{Candidate, ProblemSpec};
use crate::verifier::{verify, VerifyMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CegisStatus {
    Certified,
    Infeasible,
    BudgetExhausted,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Size of the sample set when the learner ran.
    pub samples: usize,
    /// Indices (into the final sample set) of the hull vertices passed to
    /// the learner.
    pub hull: Vec<usize>,
    pub learner_status: LearnerStatus,
    /// Optimal margin `t*` before any normalization.
    pub margin: f64,
    pub candidate: Option<Candidate>,
    pub lambda_hat: Option<f64>,
    pub method: Option<VerifyMethod>,
    pub evaluations: usize,
    pub certified: bool,
    pub verifier_seed: Option<u64>,
    pub counterexample: Option<(Matrix, Matrix)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub eps: f64,
    pub eta: f64,
    pub w_max: f64,
    pub n_t: usize,
    pub seed: u64,
    pub accept_threshold: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub hull: Duration,
    pub learner: Duration,
    pub verifier: Duration,
    pub total: Duration,
}

/// What to change after an infeasible learner problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityHint {
    /// `eps - t*`.
    pub margin_deficit: f64,
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CegisReport {
    pub status: CegisStatus,
    pub iterations: usize,
    pub candidate: Option<Candidate>,
    pub counterexamples: CounterexampleSet,
    pub trace: Vec<IterationRecord>,
    pub config: ConfigEcho,
    pub timings: Timings,
    pub infeasibility: Option<InfeasibilityHint>,
    pub stall_reason: Option<String>,
}

impl CegisReport {
    /// Equality of everything except wall-clock timings.
    pub fn same_outcome(&self, other: &CegisReport) -> bool {
        let mut a = self.clone();
        a.timings = other.timings;
        a == *other
    }
}

/// One row of [`iteration_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub margin: f64,
    pub lambda_hat: Option<f64>,
    pub method: Option<VerifyMethod>,
}

pub fn iteration_trace(report: &CegisReport) -> Vec<TraceEntry> {
    report
        .trace
        .iter()
        .map(|r| TraceEntry {
            margin: r.margin,
            lambda_hat: r.lambda_hat,
            method: r.method,
        })
        .collect()
}

/// Run the loop until certification, infeasibility, a stall or `max_iters`.
pub fn run(spec: &ProblemSpec) -> Result<CegisReport> {
    spec.validate()?;
    let start = Instant::now();
    let mut timings = Timings::default();
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = CounterexampleSet::new(DEFAULT_DEDUP_TOL * spec.omega.scale().max(1.0));
    let (a0, b0) = spec.first_sample();
    samples.add(a0, b0)?;

    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut status = CegisStatus::BudgetExhausted;
    let mut candidate = None;
    let mut infeasibility = None;
    let mut stall_reason = None;

    for iteration in 1..=spec.max_iters {
        let t = Instant::now();
        let hull: Vec<usize> = if spec.vertex_filter {
            samples.hull_vertex_indices()
        } else {
            (0..samples.len()).collect()
        };
        timings.hull += t.elapsed();
        let vertices: Vec<(Matrix, Matrix)> = hull.iter().map(|&i| samples.items()[i].clone()).collect();

        let t = Instant::now();
        let solved = LearnerProblem::new(vertices, spec.eps, spec.eta, spec.w_max).solve();
        timings.learner += t.elapsed();
        let mut record = IterationRecord {
            iteration,
            samples: samples.len(),
            hull,
            learner_status: LearnerStatus::Infeasible,
            margin: f64::NAN,
            candidate: None,
            lambda_hat: None,
            method: None,
            evaluations: 0,
            certified: false,
            verifier_seed: None,
            counterexample: None,
        };
        let sol = match solved {
            Ok(sol) => sol,
            Err(Error::SolverStalled(msg)) => {
                trace.push(record);
                status = CegisStatus::Stalled;
                stall_reason = Some(format!("learner: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        record.learner_status = sol.status;
        record.margin = sol.margin;
        if sol.status == LearnerStatus::Infeasible {
            infeasibility = Some(InfeasibilityHint {
                margin_deficit: spec.eps - sol.margin,
                suggestions: vec![
                    "decrease eps".into(),
                    "increase eta".into(),
                    "increase w_max".into(),
                ],
            });
            trace.push(record);
            status = CegisStatus::Infeasible;
            break;
        }
        let sol = if spec.normalize_margin { sol.normalized(spec.eps) } else { sol };
        let cand = sol.extract_candidate()?;

        let seed = seeds.next_u64();
        let t = Instant::now();
        let vr = verify(&cand, spec, seed)?;
        timings.verifier += t.elapsed();
        record.candidate = Some(cand.clone());
        record.lambda_hat = Some(vr.lambda_hat);
        record.method = Some(vr.method);
        record.evaluations = vr.evaluations;
        record.certified = vr.certified;
        record.verifier_seed = Some(seed);
        if vr.certified {
            trace.push(record);
            candidate = Some(cand);
            status = CegisStatus::Certified;
            break;
        }
        record.counterexample = Some(vr.minimizer.clone());
        trace.push(record);
        let (a, b) = vr.minimizer;
        match samples.add(a, b) {
            Ok(()) => {}
            Err(e @ Error::DuplicateCounterexample { .. }) => {
                status = CegisStatus::Stalled;
                stall_reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    timings.total = start.elapsed();
    Ok(CegisReport {
        status,
        iterations: trace.len(),
        candidate,
        counterexamples: samples,
        trace,
        config: ConfigEcho {
            eps: spec.eps,
            eta: spec.eta,
            w_max: spec.w_max,
            n_t: spec.n_t,
            seed: spec.seed,
            accept_threshold: spec.accept_threshold,
            max_iters: spec.max_iters,
        },
        timings,
        infeasibility,
        stall_reason,
    })
}
