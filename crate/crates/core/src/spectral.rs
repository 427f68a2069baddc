//! Dense symmetric spectral kernels.
//!
//! Everything the synthesis loop asks of linear algebra funnels through here:
//! smallest eigenvalues, the l2-induced operator norm, the Schur-complement
//! matrix `Xi(A_cl) = [[P, A_clᵀP], [P A_cl, P]]`, and definiteness tests.
//! Eigenvalues come from nalgebra's symmetric eigensolver (Householder
//! tridiagonalization followed by implicit symmetric QR).

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{dim_err, Error, Result};

/// General dense real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Relative PSD tolerance used by [`default_psd_tol`].
pub const PSD_REL_TOL: f64 = 1e-9;

/// A finite symmetric matrix.
///
/// Construction averages the input with its transpose so that the stored
/// entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_err(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        check_finite(&m)?;
        Ok(Self::symmetrize(m))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(dim_err(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Self::new(Matrix::from_row_slice(n, n, data))
    }

    fn symmetrize(m: Matrix) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    /// Sum of two symmetric matrices of equal order.
    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if self.order() != other.order() {
            return Err(dim_err(format!(
                "orders {} and {} differ",
                self.order(),
                other.order()
            )));
        }
        Ok(SymMatrix(&self.0 + &other.0))
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

pub(crate) fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix("non-finite entry".into()))
    }
}

/// All eigenvalues in ascending order.
pub fn eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let mut ev: Vec<f64> = m.0.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest eigenvalue.
pub fn lambda_min(m: &SymMatrix) -> Result<f64> {
    check_finite(m)?;
    Ok(m.0.symmetric_eigenvalues().min())
}

/// Largest eigenvalue.
pub fn lambda_max(m: &SymMatrix) -> Result<f64> {
    check_finite(m)?;
    Ok(m.0.symmetric_eigenvalues().max())
}

/// Smallest eigenpair plus the gap to the second-smallest eigenvalue.
///
/// The gap is `f64::INFINITY` for 1x1 inputs. The eigenvector has unit norm.
#[derive(Debug, Clone)]
pub struct MinEigenpair {
    pub value: f64,
    pub vector: Vector,
    pub gap: f64,
}

pub fn min_eigenpair(m: &SymMatrix) -> Result<MinEigenpair> {
    check_finite(m)?;
    let eig = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let i0 = order[0];
    let gap = order
        .get(1)
        .map(|&i1| eig.eigenvalues[i1] - eig.eigenvalues[i0])
        .unwrap_or(f64::INFINITY);
    let vector = eig.eigenvectors.column(i0).normalize();
    Ok(MinEigenpair {
        value: eig.eigenvalues[i0],
        vector,
        gap,
    })
}

/// l2-induced operator norm (largest singular value).
pub fn op_norm(m: &Matrix) -> Result<f64> {
    check_finite(m)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let svd = SVD::new(m.clone(), false, false);
    Ok(svd.singular_values.max())
}

/// The 2n x 2n matrix `[[P, A_clᵀP], [P A_cl, P]]`.
pub fn xi(p: &SymMatrix, a_cl: &Matrix) -> Result<SymMatrix> {
    let n = p.order();
    if a_cl.nrows() != n || a_cl.ncols() != n {
        return Err(dim_err(format!(
            "closed-loop matrix is {}x{}, P has order {}",
            a_cl.nrows(),
            a_cl.ncols(),
            n
        )));
    }
    check_finite(a_cl)?;
    let pa = p.as_matrix() * a_cl;
    let mut out = Matrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(p.as_matrix());
    out.view_mut((n, n), (n, n)).copy_from(p.as_matrix());
    out.view_mut((n, 0), (n, n)).copy_from(&pa);
    out.view_mut((0, n), (n, n)).copy_from(&pa.transpose());
    Ok(SymMatrix(out))
}

/// `1e-9 * order * max(1, ‖M‖)`.
pub fn default_psd_tol(m: &SymMatrix) -> Result<f64> {
    Ok(PSD_REL_TOL * m.order() as f64 * op_norm(m)?.max(1.0))
}

/// True iff `lambda_min(M) >= -tol`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<bool> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidMatrix(format!("negative tolerance {tol}")));
    }
    check_finite(m)?;
    // Fast accept: M + tol I admits a Cholesky factor strictly inside the cone.
    let shifted = &m.0 + Matrix::identity(m.order(), m.order()) * (tol * 0.5);
    if Cholesky::new(shifted).is_some() {
        return Ok(true);
    }
    Ok(lambda_min(m)? >= -tol)
}

/// `|lambda_min(K) - lambda_min(K + L)|`.
pub fn weyl_gap(k: &SymMatrix, l: &SymMatrix) -> Result<f64> {
    let sum = k.add(l)?;
    Ok((lambda_min(k)? - lambda_min(&sum)?).abs())
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd(m: &SymMatrix) -> Result<SymMatrix> {
    check_finite(m)?;
    let ch = Cholesky::new(m.0.clone()).ok_or(Error::NotSpd)?;
    if lambda_min(m)? <= 0.0 {
        return Err(Error::NotSpd);
    }
    let inv = ch.inverse();
    check_finite(&inv).map_err(|_| Error::NotSpd)?;
    Ok(SymMatrix::symmetrize(inv))
}
