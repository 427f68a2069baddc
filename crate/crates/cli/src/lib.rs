//! File formats and subcommands of the `cegis-clf` binary.
//!
//! ```text
//! cegis-clf synth   <problem.json> [--out report.json] [--seed S] [--max-iters I]
//! cegis-clf verify  <problem.json> --candidate <pk.json> [--out FILE] [--seed S]
//! cegis-clf certify <problem.json> --candidate <pk.json> [--samples N] [--tol T] [--seed S] [--out FILE]
//! ```
//!
//! Exit codes: 0 certified or pass, 1 infeasible or fail, 2 iteration budget
//! exhausted or stalled, 3 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use cegis_clf::{certify_sampled, certify_vertices, run, verify, CegisStatus, ProblemSpec, UncertaintySet};

pub mod problem;
pub mod report;

pub use problem::{parse_problem, serialize_problem, ProblemFile};
pub use report::{parse_candidate, CandidateFile, CertifyReport, SynthReport, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Default sample count for `certify` on sets without finitely many vertices.
pub const DEFAULT_CERTIFY_SAMPLES: usize = 100_000;
pub const DEFAULT_CERTIFY_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cegis_clf::Error),
}

impl CliError {
    pub(crate) fn parse(origin: &str, e: &serde_json::Error) -> Self {
        CliError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cegis-clf", version, about = "Synthesize and check quadratic control Lyapunov functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the learner/verifier loop on a problem file.
    Synth {
        problem: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// One verifier pass on a given candidate.
    Verify {
        problem: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Independent check of a candidate: every vertex of an interval or
    /// polytopic set, otherwise (or with --samples) random members.
    Certify {
        problem: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CERTIFY_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, CliError> {
    parse_problem(&read(path)?, &path.display().to_string())
}

pub fn load_candidate(path: &Path) -> Result<cegis_clf::Candidate, CliError> {
    parse_candidate(&read(path)?, &path.display().to_string())
}

fn emit(json: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, format!("{json}\n")).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn check_shape(spec: &ProblemSpec, cand: &cegis_clf::Candidate) -> Result<(), CliError> {
    if cand.n() != spec.n() || cand.m() != spec.m() {
        return Err(CliError::Config(format!(
            "candidate is for n={}, m={} but the problem has n={}, m={}",
            cand.n(),
            cand.m(),
            spec.n(),
            spec.m()
        )));
    }
    Ok(())
}

/// Execute a parsed command, returning the exit code.
pub fn execute(cmd: &Command) -> Result<i32, CliError> {
    match cmd {
        Command::Synth {
            problem,
            out,
            seed,
            max_iters,
        } => {
            let mut spec = load_problem(problem)?;
            if let Some(s) = seed {
                spec.seed = *s;
            }
            if let Some(i) = max_iters {
                spec.max_iters = *i;
            }
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let report = run(&spec)?;
            emit(&to_json(&SynthReport::new(&report)), out.as_deref())?;
            eprintln!(
                "{:?} after {} iteration(s), {} stored sample(s)",
                report.status,
                report.iterations,
                report.counterexamples.len()
            );
            Ok(match report.status {
                CegisStatus::Certified => EXIT_OK,
                CegisStatus::Infeasible => EXIT_FAIL,
                CegisStatus::BudgetExhausted | CegisStatus::Stalled => EXIT_BUDGET,
            })
        }
        Command::Verify {
            problem,
            candidate,
            out,
            seed,
        } => {
            let spec = load_problem(problem)?;
            let cand = load_candidate(candidate)?;
            check_shape(&spec, &cand)?;
            let seed = seed.unwrap_or(spec.seed);
            let start = Instant::now();
            let res = verify(&cand, &spec, seed)?;
            let rep = VerifyReport::new(&res, spec.accept_threshold, seed, start.elapsed());
            emit(&to_json(&rep), out.as_deref())?;
            eprintln!(
                "lambda_hat = {:.6e} ({:?}, {} evaluations): {}",
                res.lambda_hat,
                res.method,
                res.evaluations,
                if res.certified { "certified" } else { "counter-example found" }
            );
            Ok(if res.certified { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Certify {
            problem,
            candidate,
            samples,
            tol,
            seed,
            out,
        } => {
            let spec = load_problem(problem)?;
            let cand = load_candidate(candidate)?;
            check_shape(&spec, &cand)?;
            let start = Instant::now();
            let vertex_set = !matches!(spec.omega, UncertaintySet::Ellipsoid { .. });
            let (cert, mode, used_seed) = match samples {
                None if vertex_set => (certify_vertices(&cand, &spec.omega, *tol)?, report::CertifyMode::Vertices, None),
                _ => {
                    let n = samples.unwrap_or(DEFAULT_CERTIFY_SAMPLES);
                    (
                        certify_sampled(&cand, &spec.omega, n, *seed, *tol)?,
                        report::CertifyMode::Sampled,
                        Some(*seed),
                    )
                }
            };
            let rep = CertifyReport::new(&cert, mode, *tol, used_seed, start.elapsed());
            emit(&to_json(&rep), out.as_deref())?;
            eprintln!(
                "{} over {} point(s): worst lambda_min = {:.6e}",
                if cert.pass { "pass" } else { "FAIL" },
                cert.evaluated,
                cert.worst
            );
            Ok(if cert.pass { EXIT_OK } else { EXIT_FAIL })
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
