//! Counter-example guided synthesis of quadratic control Lyapunov functions
//! `V(x) = xᵀPx` and state-feedback gains `u = Kx` for discrete-time linear
//! systems `x⁺ = Ax + Bu` with `(A, B)` ranging over a compact set.
//!
//! A learner solves an LMI problem on finitely many sampled pairs; a verifier
//! globally minimizes `λ_min([[P, A_clᵀP], [PA_cl, P]])` over the whole set and
//! either returns a violating pair or certifies the candidate.
//!
//! ```
//! use cegis_clf::{run, CegisStatus, Matrix, ProblemSpec, UncertaintySet};
//!
//! let omega = UncertaintySet::interval(
//!     Matrix::from_element(1, 1, 0.5),
//!     Matrix::from_element(1, 1, 1.5),
//!     Matrix::from_element(1, 1, 0.8),
//!     Matrix::from_element(1, 1, 1.2),
//! )
//! .unwrap();
//! let report = run(&ProblemSpec::new(omega).with_bounds(1e-2, 1e2)).unwrap();
//! assert_eq!(report.status, CegisStatus::Certified);
//! ```

pub mod cegis;
pub mod certify;
pub mod counterexamples;
pub mod direct;
pub mod error;
pub mod learner;
pub mod lp;
pub mod sdp;
pub mod spectral;
pub mod system;
pub mod uncertainty;
pub mod verifier;

pub use cegis::{iteration_trace, run, CegisReport, CegisStatus, IterationRecord, TraceEntry};
pub use certify::{certify_sampled, certify_vertices, grid_oracle, Certificate, GridMin};
pub use counterexamples::CounterexampleSet;
pub use error::{Error, Result};
pub use learner::{LearnerProblem, LearnerSolution, LearnerStatus};
pub use spectral::{Matrix, SymMatrix, Vector};
pub use system::{Candidate, ProblemSpec, VerifierBudget};
pub use uncertainty::UncertaintySet;
pub use verifier::{global_minimize, lipschitz_budget, objective, verify, LipschitzBudget, VerifierResult, VerifyMethod};
