//! Compact uncertainty sets for the pair `(A, B)`.
//!
//! Three shapes are supported: entrywise intervals, an ellipsoid in `vec(A)`
//! with a fixed input matrix, and the convex hull of explicit vertex pairs.
//! Each set exposes a box parameterization ([`BoxParam`]) that the global
//! optimizer searches over, a sampler, and a membership test.
//!
//! `vec` stacks columns, matching nalgebra's column-major storage.

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{dim_err, Error, Result};
use crate::lp;
use crate::spectral::{check_finite, inverse_spd, Matrix, SymMatrix, Vector};

/// Largest number of uncertain interval entries whose vertices we enumerate.
pub const MAX_VERTEX_BITS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    /// Entrywise bounds `a_lo <= A <= a_hi`, `b_lo <= B <= b_hi`.
    Interval {
        a_lo: Matrix,
        a_hi: Matrix,
        b_lo: Matrix,
        b_hi: Matrix,
    },
    /// `{A : (vec(A) - c)ᵀ Q (vec(A) - c) <= 1}` with `B` fixed.
    Ellipsoid { center: Vector, q: SymMatrix, b: Matrix },
    /// Convex hull of the listed `(A, B)` pairs.
    Polytope { vertices: Vec<(Matrix, Matrix)> },
}

/// One uncertain scalar of `A` or `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntrySlot {
    pub in_b: bool,
    pub row: usize,
    pub col: usize,
}

/// Column-major vectorization of the pair: `[vec(A); vec(B)]`.
pub fn vec_pair(a: &Matrix, b: &Matrix) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

impl UncertaintySet {
    pub fn interval(a_lo: Matrix, a_hi: Matrix, b_lo: Matrix, b_hi: Matrix) -> Result<Self> {
        let n = a_lo.nrows();
        if n == 0 || !a_lo.is_square() || a_hi.shape() != a_lo.shape() {
            return Err(dim_err("interval A bounds must be equal-shaped square matrices"));
        }
        if b_lo.nrows() != n || b_lo.ncols() == 0 || b_hi.shape() != b_lo.shape() {
            return Err(dim_err("interval B bounds must be n x m with matching shapes"));
        }
        for m in [&a_lo, &a_hi, &b_lo, &b_hi] {
            check_finite(m)?;
        }
        let ordered = a_lo.iter().zip(a_hi.iter()).all(|(l, h)| l <= h)
            && b_lo.iter().zip(b_hi.iter()).all(|(l, h)| l <= h);
        if !ordered {
            return Err(Error::Config("interval lower bound exceeds upper bound".into()));
        }
        Ok(UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi })
    }

    /// Interval set with an exactly known input matrix.
    pub fn interval_fixed_b(a_lo: Matrix, a_hi: Matrix, b: Matrix) -> Result<Self> {
        Self::interval(a_lo, a_hi, b.clone(), b)
    }

    pub fn singleton(a: Matrix, b: Matrix) -> Result<Self> {
        Self::interval(a.clone(), a, b.clone(), b)
    }

    pub fn ellipsoid(center: Vector, q: SymMatrix, b: Matrix) -> Result<Self> {
        let n = b.nrows();
        if n == 0 || b.ncols() == 0 || center.len() != n * n || q.order() != n * n {
            return Err(dim_err("ellipsoid needs c of length n², Q of order n², B of shape n x m"));
        }
        check_finite(&b)?;
        if !center.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite ellipsoid center".into()));
        }
        if Cholesky::new(q.as_matrix().clone()).is_none() {
            return Err(Error::Config("ellipsoid shape matrix Q must be positive definite".into()));
        }
        Ok(UncertaintySet::Ellipsoid { center, q, b })
    }

    pub fn polytope(vertices: Vec<(Matrix, Matrix)>) -> Result<Self> {
        let Some((a0, b0)) = vertices.first() else {
            return Err(Error::Config("polytope needs at least one vertex".into()));
        };
        let n = a0.nrows();
        if n == 0 || !a0.is_square() || b0.nrows() != n || b0.ncols() == 0 {
            return Err(dim_err("polytope vertex must be (n x n, n x m)"));
        }
        for (a, b) in &vertices {
            if a.shape() != a0.shape() || b.shape() != b0.shape() {
                return Err(dim_err("polytope vertices have inconsistent shapes"));
            }
            check_finite(a)?;
            check_finite(b)?;
        }
        Ok(UncertaintySet::Polytope { vertices })
    }

    pub fn n(&self) -> usize {
        match self {
            UncertaintySet::Interval { a_lo, .. } => a_lo.nrows(),
            UncertaintySet::Ellipsoid { b, .. } => b.nrows(),
            UncertaintySet::Polytope { vertices } => vertices[0].0.nrows(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            UncertaintySet::Interval { b_lo, .. } => b_lo.ncols(),
            UncertaintySet::Ellipsoid { b, .. } => b.ncols(),
            UncertaintySet::Polytope { vertices } => vertices[0].1.ncols(),
        }
    }

    /// Whether `B` can vary inside the set.
    pub fn b_uncertain(&self) -> bool {
        match self {
            UncertaintySet::Interval { b_lo, b_hi, .. } => b_lo != b_hi,
            UncertaintySet::Ellipsoid { .. } => false,
            UncertaintySet::Polytope { vertices } => vertices.iter().any(|(_, b)| b != &vertices[0].1),
        }
    }

    /// Deterministic member used as the first sample: interval midpoint,
    /// ellipsoid center, or first listed vertex.
    pub fn representative(&self) -> (Matrix, Matrix) {
        match self {
            UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi } => {
                ((a_lo + a_hi) * 0.5, (b_lo + b_hi) * 0.5)
            }
            UncertaintySet::Ellipsoid { center, b, .. } => {
                let n = b.nrows();
                (Matrix::from_column_slice(n, n, center.as_slice()), b.clone())
            }
            UncertaintySet::Polytope { vertices } => vertices[0].clone(),
        }
    }

    /// Largest absolute entry over the set's bounding box (at least 1).
    pub fn scale(&self) -> f64 {
        let bp = self.box_param();
        let mut s = 1.0f64;
        let (a, b) = self.representative();
        for v in a.iter().chain(b.iter()) {
            s = s.max(v.abs());
        }
        for v in bp.lo.iter().chain(bp.hi.iter()) {
            s = s.max(v.abs());
        }
        s
    }

    fn check_pair_dims(&self, a: &Matrix, b: &Matrix) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if a.shape() != (n, n) || b.shape() != (n, m) {
            return Err(dim_err(format!(
                "expected A {n}x{n} and B {n}x{m}, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(())
    }

    /// Membership up to `tol`.
    pub fn contains(&self, a: &Matrix, b: &Matrix, tol: f64) -> Result<bool> {
        self.check_pair_dims(a, b)?;
        Ok(match self {
            UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi } => {
                let within = |x: &Matrix, lo: &Matrix, hi: &Matrix| {
                    x.iter()
                        .zip(lo.iter().zip(hi.iter()))
                        .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
                };
                within(a, a_lo, a_hi) && within(b, b_lo, b_hi)
            }
            UncertaintySet::Ellipsoid { center, q, b: b_fixed } => {
                let d = Vector::from_column_slice(a.as_slice()) - center;
                let form = d.dot(&(q.as_matrix() * &d));
                form <= 1.0 + tol && (b - b_fixed).amax() <= tol
            }
            UncertaintySet::Polytope { vertices } => {
                let pts: Vec<Vector> = vertices.iter().map(|(va, vb)| vec_pair(va, vb)).collect();
                let refs: Vec<&Vector> = pts.iter().collect();
                lp::in_hull(&refs, &vec_pair(a, b), tol)
            }
        })
    }

    /// Search box and constraint for the global optimizer.
    pub fn box_param(&self) -> BoxParam {
        match self {
            UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi } => {
                let mut slots = Vec::new();
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for (in_b, l, h) in [(false, a_lo, a_hi), (true, b_lo, b_hi)] {
                    for col in 0..l.ncols() {
                        for row in 0..l.nrows() {
                            if l[(row, col)] < h[(row, col)] {
                                slots.push(EntrySlot { in_b, row, col });
                                lo.push(l[(row, col)]);
                                hi.push(h[(row, col)]);
                            }
                        }
                    }
                }
                BoxParam {
                    lo,
                    hi,
                    map: BoxMap::Entries {
                        base_a: a_lo.clone(),
                        base_b: b_lo.clone(),
                        slots,
                        ball: None,
                    },
                }
            }
            UncertaintySet::Ellipsoid { center, q, b } => {
                let n = b.nrows();
                let q_inv = inverse_spd(q).expect("ellipsoid Q validated positive definite");
                let half: Vec<f64> = (0..n * n).map(|j| q_inv[(j, j)].sqrt()).collect();
                let slots = (0..n)
                    .flat_map(|col| (0..n).map(move |row| EntrySlot { in_b: false, row, col }))
                    .collect();
                BoxParam {
                    lo: center.iter().zip(&half).map(|(c, h)| c - h).collect(),
                    hi: center.iter().zip(&half).map(|(c, h)| c + h).collect(),
                    map: BoxMap::Entries {
                        base_a: Matrix::zeros(n, n),
                        base_b: b.clone(),
                        slots,
                        ball: Some(Ball {
                            center: center.clone(),
                            q: q.as_matrix().clone(),
                        }),
                    },
                }
            }
            UncertaintySet::Polytope { vertices } => BoxParam {
                lo: vec![0.0; vertices.len()],
                hi: vec![1.0; vertices.len()],
                map: BoxMap::Weights { vertices: vertices.clone() },
            },
        }
    }

    /// Gray-code stream over all vertices of an interval set.
    pub fn vertex_stream(&self) -> Result<VertexStream> {
        let UncertaintySet::Interval { a_lo, b_lo, .. } = self else {
            return Err(Error::InvalidState("vertex streams exist only for interval sets".into()));
        };
        let bp = self.box_param();
        let BoxMap::Entries { slots, .. } = bp.map else { unreachable!() };
        if slots.len() > MAX_VERTEX_BITS {
            return Err(Error::TooManyVertices {
                uncertain: slots.len(),
                limit: MAX_VERTEX_BITS,
            });
        }
        Ok(VertexStream {
            a: a_lo.clone(),
            b: b_lo.clone(),
            lo: bp.lo,
            hi: bp.hi,
            at_hi: vec![false; slots.len()],
            slots,
            next_index: 0,
        })
    }

    /// Random member: uniform on boxes, uniform in the ellipsoid, flat
    /// Dirichlet weights on polytope vertices.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Matrix, Matrix) {
        match self {
            UncertaintySet::Interval { a_lo, a_hi, b_lo, b_hi } => {
                let mut draw = |lo: &Matrix, hi: &Matrix| {
                    Matrix::from_fn(lo.nrows(), lo.ncols(), |r, c| {
                        let (l, h) = (lo[(r, c)], hi[(r, c)]);
                        if l == h {
                            l
                        } else {
                            l + (h - l) * rng.random::<f64>()
                        }
                    })
                };
                let a = draw(a_lo, a_hi);
                let b = draw(b_lo, b_hi);
                (a, b)
            }
            UncertaintySet::Ellipsoid { center, q, b } => {
                let d = center.len();
                let mut u = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
                let norm = u.norm();
                if norm > 0.0 {
                    u /= norm;
                }
                u *= rng.random::<f64>().powf(1.0 / d as f64);
                // Q = L Lᵀ, z = c + L⁻ᵀ u gives (z-c)ᵀ Q (z-c) = ‖u‖².
                let l = Cholesky::new(q.as_matrix().clone())
                    .expect("ellipsoid Q validated positive definite")
                    .l();
                let offset = l
                    .transpose()
                    .solve_upper_triangular(&u)
                    .expect("Cholesky factor has a positive diagonal");
                let n = b.nrows();
                let z = center + offset;
                (Matrix::from_column_slice(n, n, z.as_slice()), b.clone())
            }
            UncertaintySet::Polytope { vertices } => {
                let mut w: Vec<f64> = (0..vertices.len()).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                combine(vertices, &w)
            }
        }
    }
}

fn combine(vertices: &[(Matrix, Matrix)], w: &[f64]) -> (Matrix, Matrix) {
    let (a0, b0) = &vertices[0];
    let mut a = Matrix::zeros(a0.nrows(), a0.ncols());
    let mut b = Matrix::zeros(b0.nrows(), b0.ncols());
    for ((va, vb), wk) in vertices.iter().zip(w) {
        a += va * *wk;
        b += vb * *wk;
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
struct Ball {
    center: Vector,
    q: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
enum BoxMap {
    /// Each coordinate overwrites one entry of a base pair.
    Entries {
        base_a: Matrix,
        base_b: Matrix,
        slots: Vec<EntrySlot>,
        ball: Option<Ball>,
    },
    /// Coordinates are unnormalized convex weights on the listed vertices.
    Weights { vertices: Vec<(Matrix, Matrix)> },
}

/// Box `[lo, hi]` mapped affinely (or, for polytopes, by weight
/// normalization) onto `(A, B)` pairs, with a scalar constraint `g(z) <= 0`
/// characterizing membership.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxParam {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    map: BoxMap,
}

impl BoxParam {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Whether every point of the box decodes into the set.
    pub fn is_box_exact(&self) -> bool {
        !matches!(&self.map, BoxMap::Entries { ball: Some(_), .. })
    }

    pub fn decode(&self, z: &[f64]) -> (Matrix, Matrix) {
        debug_assert_eq!(z.len(), self.dim());
        match &self.map {
            BoxMap::Entries { base_a, base_b, slots, .. } => {
                let mut a = base_a.clone();
                let mut b = base_b.clone();
                for (s, v) in slots.iter().zip(z) {
                    if s.in_b {
                        b[(s.row, s.col)] = *v;
                    } else {
                        a[(s.row, s.col)] = *v;
                    }
                }
                (a, b)
            }
            BoxMap::Weights { vertices } => combine(vertices, &normalized_weights(z)),
        }
    }

    /// Inverse of [`decode`](Self::decode) on members of the set.
    pub fn encode(&self, a: &Matrix, b: &Matrix) -> Vec<f64> {
        match &self.map {
            BoxMap::Entries { slots, .. } => slots
                .iter()
                .map(|s| if s.in_b { b[(s.row, s.col)] } else { a[(s.row, s.col)] })
                .collect(),
            BoxMap::Weights { vertices } => {
                let pts: Vec<Vector> = vertices.iter().map(|(va, vb)| vec_pair(va, vb)).collect();
                let refs: Vec<&Vector> = pts.iter().collect();
                lp::convex_fit(&refs, &vec_pair(a, b)).weights
            }
        }
    }

    /// `g(z)`; the decoded pair belongs to the set iff `g(z) <= 0`.
    pub fn constraint(&self, z: &[f64]) -> f64 {
        match &self.map {
            BoxMap::Entries { ball: Some(ball), .. } => {
                let d = Vector::from_column_slice(z) - &ball.center;
                d.dot(&(&ball.q * &d)) - 1.0
            }
            _ => -1.0,
        }
    }

    /// Lower bound on `‖∇g‖₂` over the constraint boundary, or `None` when
    /// the constraint is vacuous.
    pub fn constraint_gradient_floor(&self) -> Option<f64> {
        match &self.map {
            BoxMap::Entries { ball: Some(ball), .. } => {
                let ev = ball.q.clone().symmetric_eigenvalues();
                // ‖2 Q d‖ >= 2 λ_min(Q) ‖d‖ and ‖d‖ >= 1/sqrt(λ_max(Q)) on the boundary.
                Some(2.0 * ev.min() / ev.max().sqrt())
            }
            _ => None,
        }
    }

    /// Clamp to the box, then pull ellipsoid points radially onto the ball.
    pub fn project(&self, z: &mut [f64]) {
        for ((v, l), h) in z.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
        if let BoxMap::Entries { ball: Some(ball), .. } = &self.map {
            let d = Vector::from_column_slice(z) - &ball.center;
            let form = d.dot(&(&ball.q * &d));
            if form > 1.0 {
                let s = 1.0 / form.sqrt();
                for (v, (c, dj)) in z.iter_mut().zip(ball.center.iter().zip(d.iter())) {
                    *v = c + dj * s;
                }
            }
        }
    }

    /// Chain a gradient with respect to `(A, B)` back to the box coordinates.
    pub fn pullback(&self, z: &[f64], grad_a: &Matrix, grad_b: &Matrix) -> Vec<f64> {
        match &self.map {
            BoxMap::Entries { slots, .. } => slots
                .iter()
                .map(|s| if s.in_b { grad_b[(s.row, s.col)] } else { grad_a[(s.row, s.col)] })
                .collect(),
            BoxMap::Weights { vertices } => {
                let total: f64 = z.iter().sum();
                if total <= 0.0 {
                    return vec![0.0; z.len()];
                }
                let (a, b) = combine(vertices, &normalized_weights(z));
                // d(sum_k w_k V_k / S)/dw_j = (V_j - current) / S
                vertices
                    .iter()
                    .map(|(va, vb)| {
                        ((va - &a).dot(grad_a) + (vb - &b).dot(grad_b)) / total
                    })
                    .collect()
            }
        }
    }

    /// Entry slots of an entry-mapped box (empty for polytope weights).
    pub fn slots(&self) -> &[EntrySlot] {
        match &self.map {
            BoxMap::Entries { slots, .. } => slots,
            BoxMap::Weights { .. } => &[],
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

fn normalized_weights(z: &[f64]) -> Vec<f64> {
    let s: f64 = z.iter().map(|v| v.max(0.0)).sum();
    if s > 0.0 {
        z.iter().map(|v| v.max(0.0) / s).collect()
    } else {
        vec![1.0 / z.len() as f64; z.len()]
    }
}

/// Reflected-binary walk over the vertices of an interval set; consecutive
/// vertices differ in exactly one entry.
#[derive(Debug, Clone)]
pub struct VertexStream {
    a: Matrix,
    b: Matrix,
    slots: Vec<EntrySlot>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    at_hi: Vec<bool>,
    next_index: u64,
}

/// Single-entry change performed by [`VertexStream::advance`].
#[derive(Debug, Clone, Copy)]
pub struct Flip {
    pub slot: EntrySlot,
    pub old: f64,
    pub new: f64,
}

impl VertexStream {
    /// Total number of vertices, `2^q`.
    pub fn vertex_count(&self) -> u64 {
        1u64 << self.slots.len()
    }

    pub fn current(&self) -> (&Matrix, &Matrix) {
        (&self.a, &self.b)
    }

    /// Move to the next vertex. Returns `None` once exhausted, `Some(None)`
    /// for the first vertex, and `Some(Some(flip))` afterwards.
    pub fn advance(&mut self) -> Option<Option<Flip>> {
        if self.next_index >= self.vertex_count() {
            return None;
        }
        let i = self.next_index;
        self.next_index += 1;
        if i == 0 {
            return Some(None);
        }
        let j = i.trailing_zeros() as usize;
        let slot = self.slots[j];
        self.at_hi[j] = !self.at_hi[j];
        let new = if self.at_hi[j] { self.hi[j] } else { self.lo[j] };
        let target = if slot.in_b { &mut self.b } else { &mut self.a };
        let old = target[(slot.row, slot.col)];
        target[(slot.row, slot.col)] = new;
        Some(Some(Flip { slot, old, new }))
    }
}

impl Iterator for VertexStream {
    type Item = (Matrix, Matrix);

    fn next(&mut self) -> Option<Self::Item> {
        self.advance()?;
        Some((self.a.clone(), self.b.clone()))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.vertex_count() - self.next_index) as usize;
        (left, Some(left))
    }
}
