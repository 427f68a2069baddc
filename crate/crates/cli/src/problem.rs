//! JSON problem files. Matrices are row-major nested arrays.

use serde::{Deserialize, Serialize};

use cegis_clf::system::{DEFAULT_EPS, DEFAULT_ETA, DEFAULT_MAX_ITERS, DEFAULT_N_T, DEFAULT_SEED, DEFAULT_W_MAX};
use cegis_clf::{Matrix, ProblemSpec, SymMatrix, UncertaintySet, VerifierBudget, Vector};

use crate::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub a: Rows,
    pub b: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyFile {
    /// Entrywise bounds. Give either `b` (certain input matrix) or both
    /// `b_lo` and `b_hi`.
    Interval {
        a_lo: Rows,
        a_hi: Rows,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Rows>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_lo: Option<Rows>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_hi: Option<Rows>,
    },
    /// `{A : (vec(A) - c)ᵀ Q (vec(A) - c) <= 1}`, `vec` stacking columns.
    Ellipsoid { c: Vec<f64>, q: Rows, b: Rows },
    Polytope { vertices: Vec<PairFile> },
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_w_max() -> f64 {
    DEFAULT_W_MAX
}
fn default_n_t() -> usize {
    DEFAULT_N_T
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub uncertainty: UncertaintyFile,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_w_max")]
    pub w_max: f64,
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    /// Defaults to `eps / 2`.
    #[serde(default)]
    pub accept_threshold: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub verifier_budget: VerifierBudget,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sample: Option<PairFile>,
    #[serde(default = "yes")]
    pub vertex_filter: bool,
    #[serde(default = "yes")]
    pub normalize_margin: bool,
}

fn config(e: cegis_clf::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn to_rows(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &Rows, nrows: usize, ncols: usize, field: &str) -> Result<Matrix, CliError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        let got_cols = rows.first().map_or(0, Vec::len);
        return Err(CliError::Config(format!(
            "`{field}` must be {nrows}x{ncols}, got {}x{got_cols}",
            rows.len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl PairFile {
    pub fn from_pair(a: &Matrix, b: &Matrix) -> Self {
        PairFile {
            a: to_rows(a),
            b: to_rows(b),
        }
    }

    pub fn to_pair(&self, n: usize, m: usize, field: &str) -> Result<(Matrix, Matrix), CliError> {
        Ok((
            from_rows(&self.a, n, n, &format!("{field}.a"))?,
            from_rows(&self.b, n, m, &format!("{field}.b"))?,
        ))
    }
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<ProblemSpec, CliError> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(CliError::Config("`n` and `m` must be positive".into()));
        }
        let omega = match &self.uncertainty {
            UncertaintyFile::Interval { a_lo, a_hi, b, b_lo, b_hi } => {
                let a_lo = from_rows(a_lo, n, n, "uncertainty.a_lo")?;
                let a_hi = from_rows(a_hi, n, n, "uncertainty.a_hi")?;
                match (b, b_lo, b_hi) {
                    (Some(b), None, None) => {
                        UncertaintySet::interval_fixed_b(a_lo, a_hi, from_rows(b, n, m, "uncertainty.b")?)
                    }
                    (None, Some(lo), Some(hi)) => UncertaintySet::interval(
                        a_lo,
                        a_hi,
                        from_rows(lo, n, m, "uncertainty.b_lo")?,
                        from_rows(hi, n, m, "uncertainty.b_hi")?,
                    ),
                    _ => {
                        return Err(CliError::Config(
                            "interval uncertainty needs either `b` or both `b_lo` and `b_hi`".into(),
                        ))
                    }
                }
            }
            UncertaintyFile::Ellipsoid { c, q, b } => {
                if c.len() != n * n {
                    return Err(CliError::Config(format!(
                        "`uncertainty.c` must have {} entries, got {}",
                        n * n,
                        c.len()
                    )));
                }
                let q = SymMatrix::new(from_rows(q, n * n, n * n, "uncertainty.q")?).map_err(config)?;
                UncertaintySet::ellipsoid(Vector::from_column_slice(c), q, from_rows(b, n, m, "uncertainty.b")?)
            }
            UncertaintyFile::Polytope { vertices } => {
                let pairs = vertices
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v.to_pair(n, m, &format!("uncertainty.vertices[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                UncertaintySet::polytope(pairs)
            }
        }
        .map_err(config)?;
        let mut spec = ProblemSpec::new(omega).with_bounds(self.eps, self.eta);
        spec.w_max = self.w_max;
        spec.n_t = self.n_t;
        if let Some(t) = self.accept_threshold {
            spec.accept_threshold = t;
        }
        spec.max_iters = self.max_iters;
        spec.verifier_budget = self.verifier_budget;
        spec.seed = self.seed;
        spec.initial_sample = self
            .initial_sample
            .as_ref()
            .map(|p| p.to_pair(n, m, "initial_sample"))
            .transpose()?;
        spec.vertex_filter = self.vertex_filter;
        spec.normalize_margin = self.normalize_margin;
        spec.validate().map_err(config)?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let uncertainty = match &spec.omega {
            UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi } => {
                let fixed = b_lo == b_hi;
                UncertaintyFile::Interval {
                    a_lo: to_rows(a_lo),
                    a_hi: to_rows(a_hi),
                    b: fixed.then(|| to_rows(b_lo)),
                    b_lo: (!fixed).then(|| to_rows(b_lo)),
                    b_hi: (!fixed).then(|| to_rows(b_hi)),
                }
            }
            UncertaintySet::Ellipsoid { center, q, b } => UncertaintyFile::Ellipsoid {
                c: center.iter().copied().collect(),
                q: to_rows(q.as_matrix()),
                b: to_rows(b),
            },
            UncertaintySet::Polytope { vertices } => UncertaintyFile::Polytope {
                vertices: vertices.iter().map(|(a, b)| PairFile::from_pair(a, b)).collect(),
            },
        };
        ProblemFile {
            n: spec.n(),
            m: spec.m(),
            uncertainty,
            eps: spec.eps,
            eta: spec.eta,
            w_max: spec.w_max,
            n_t: spec.n_t,
            accept_threshold: Some(spec.accept_threshold),
            max_iters: spec.max_iters,
            verifier_budget: spec.verifier_budget,
            seed: spec.seed,
            initial_sample: spec.initial_sample.as_ref().map(|(a, b)| PairFile::from_pair(a, b)),
            vertex_filter: spec.vertex_filter,
            normalize_margin: spec.normalize_margin,
        }
    }
}

/// Parse and validate a problem file. `origin` names the input in errors.
pub fn parse_problem(text: &str, origin: &str) -> Result<ProblemSpec, CliError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::parse(origin, &e))?;
    file.into_spec()
}

pub fn serialize_problem(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_spec(spec)).expect("problem files serialize")
}
