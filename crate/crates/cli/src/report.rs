//! Candidate files and the JSON reports written by each subcommand.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cegis_clf::cegis::{ConfigEcho, InfeasibilityHint, Timings};
use cegis_clf::{
    Candidate, CegisReport, CegisStatus, Certificate, LearnerStatus, SymMatrix, VerifierResult, VerifyMethod,
};

use crate::problem::{from_rows, to_rows, PairFile, Rows};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFile {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
}

impl CandidateFile {
    pub fn from_candidate(c: &Candidate) -> Self {
        CandidateFile {
            p: to_rows(c.p.as_matrix()),
            k: to_rows(&c.k),
        }
    }

    pub fn to_candidate(&self) -> Result<Candidate, CliError> {
        let n = self.p.len();
        let m = self.k.len();
        let p = from_rows(&self.p, n, n, "P")?;
        let k = from_rows(&self.k, m, n, "K")?;
        Ok(Candidate::new(SymMatrix::new(p)?, k)?)
    }
}

/// Read `{P, K}` either at the top level or under the `candidate` key of a
/// synthesis report.
pub fn parse_candidate(text: &str, origin: &str) -> Result<Candidate, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    let inner = match value.get("candidate") {
        Some(Value::Null) => {
            return Err(CliError::Config(format!("{origin}: the report holds no candidate")));
        }
        Some(c) => c.clone(),
        None => value,
    };
    let file: CandidateFile =
        serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    file.to_candidate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsFile {
    pub hull_s: f64,
    pub learner_s: f64,
    pub verifier_s: f64,
    pub total_s: f64,
}

impl From<&Timings> for TimingsFile {
    fn from(t: &Timings) -> Self {
        TimingsFile {
            hull_s: t.hull.as_secs_f64(),
            learner_s: t.learner.as_secs_f64(),
            verifier_s: t.verifier.as_secs_f64(),
            total_s: t.total.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub samples: usize,
    pub hull: Vec<usize>,
    pub learner_status: LearnerStatus,
    pub margin: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub method: Option<VerifyMethod>,
    pub evaluations: usize,
    pub certified: bool,
    pub verifier_seed: Option<u64>,
    pub counterexample: Option<PairFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub status: CegisStatus,
    pub iterations: usize,
    pub seed: u64,
    pub config: ConfigEcho,
    pub candidate: Option<CandidateFile>,
    pub trace: Vec<TraceRecord>,
    pub samples: Vec<PairFile>,
    pub infeasibility: Option<InfeasibilityHint>,
    pub stall_reason: Option<String>,
    pub timings: TimingsFile,
}

impl SynthReport {
    pub fn new(r: &CegisReport) -> Self {
        SynthReport {
            status: r.status,
            iterations: r.iterations,
            seed: r.config.seed,
            config: r.config,
            candidate: r.candidate.as_ref().map(CandidateFile::from_candidate),
            trace: r
                .trace
                .iter()
                .map(|t| TraceRecord {
                    iteration: t.iteration,
                    samples: t.samples,
                    hull: t.hull.clone(),
                    learner_status: t.learner_status,
                    margin: t.margin.is_finite().then_some(t.margin),
                    lambda_hat: t.lambda_hat,
                    method: t.method,
                    evaluations: t.evaluations,
                    certified: t.certified,
                    verifier_seed: t.verifier_seed,
                    counterexample: t.counterexample.as_ref().map(|(a, b)| PairFile::from_pair(a, b)),
                })
                .collect(),
            samples: r
                .counterexamples
                .items()
                .iter()
                .map(|(a, b)| PairFile::from_pair(a, b))
                .collect(),
            infeasibility: r.infeasibility.clone(),
            stall_reason: r.stall_reason.clone(),
            timings: (&r.timings).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub certified: bool,
    pub lambda_hat: f64,
    pub method: VerifyMethod,
    pub evaluations: usize,
    pub lower_bound: Option<f64>,
    pub accept_threshold: f64,
    pub seed: u64,
    pub minimizer: PairFile,
    pub timings: ElapsedFile,
}

impl VerifyReport {
    pub fn new(r: &VerifierResult, threshold: f64, seed: u64, elapsed: Duration) -> Self {
        VerifyReport {
            certified: r.certified,
            lambda_hat: r.lambda_hat,
            method: r.method,
            evaluations: r.evaluations,
            lower_bound: r.lower_bound,
            accept_threshold: threshold,
            seed,
            minimizer: PairFile::from_pair(&r.minimizer.0, &r.minimizer.1),
            timings: ElapsedFile::new(elapsed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyMode {
    Vertices,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub pass: bool,
    pub mode: CertifyMode,
    pub worst: f64,
    pub tol: f64,
    pub evaluated: u64,
    pub seed: Option<u64>,
    pub argmin: PairFile,
    pub timings: ElapsedFile,
}

impl CertifyReport {
    pub fn new(c: &Certificate, mode: CertifyMode, tol: f64, seed: Option<u64>, elapsed: Duration) -> Self {
        CertifyReport {
            pass: c.pass,
            mode,
            worst: c.worst,
            tol,
            evaluated: c.evaluated,
            seed,
            argmin: PairFile::from_pair(&c.argmin.0, &c.argmin.1),
            timings: ElapsedFile::new(elapsed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElapsedFile {
    pub total_s: f64,
}

impl ElapsedFile {
    fn new(d: Duration) -> Self {
        ElapsedFile {
            total_s: d.as_secs_f64(),
        }
    }
}

/// The report without its `timings` key, serialized compactly; two runs
/// with the same inputs give identical strings.
pub fn without_timings(report_json: &str) -> Result<String, serde_json::Error> {
    let mut v: Value = serde_json::from_str(report_json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings");
    }
    serde_json::to_string(&v)
}
