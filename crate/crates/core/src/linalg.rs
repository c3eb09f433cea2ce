//! Small dense symmetric matrix helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor for membership in the positive definite cone.
pub const PD_EPS: f64 = 1e-10;

pub fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Symmetric and admits a Cholesky factorization.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.nrows() > 0 && is_symmetric(m) && Cholesky::new(m.clone()).is_some()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// The floating point version of "strictly positive definite": smallest
/// eigenvalue above `PD_EPS · trace / dim`. Returns the factorization and
/// the smallest eigenvalue, or `None` with the smallest eigenvalue.
pub fn pd_gate(m: &DMatrix<f64>) -> (Option<Cholesky<f64, Dyn>>, f64) {
    let dim = m.nrows();
    let lmin = min_eigenvalue(m);
    let trace = m.trace();
    if !(trace > 0.0) || !(lmin > PD_EPS * trace / dim as f64) {
        return (None, lmin);
    }
    (Cholesky::new(m.clone()), lmin)
}

/// Symmetric inverse square root via eigendecomposition.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_symmetric(m) {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&d) * q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root_whitens() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let r = inv_sqrt_spd(&m).unwrap();
        let id = &r * &m * &r;
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-10);
        assert!((&r - r.transpose()).amax() < 1e-14);
    }

    #[test]
    fn gate_rejects_singular_and_zero() {
        let z = DMatrix::zeros(2, 2);
        assert!(pd_gate(&z).0.is_none());
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(pd_gate(&s).0.is_none());
        assert!(pd_gate(&DMatrix::identity(2, 2)).0.is_some());
        assert!(inv_sqrt_spd(&s).is_err());
    }
}
