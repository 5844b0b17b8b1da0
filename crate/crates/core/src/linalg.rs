//! Small dense linear-algebra helpers shared across modules.
//!
//! Frames here are `dim x k` matrices with orthonormal columns. We use
//! modified Gram-Schmidt with a positive-diagonal convention instead of
//! Householder QR because it is continuous in the input near full rank:
//! nearby matrices orthonormalize to nearby frames, which the mesh code
//! relies on when blending transported tangent frames.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative rank threshold: columns whose residual drops below this times
/// their original norm are treated as dependent.
const RANK_TOL: f64 = 1e-13;

/// Orthonormalize the columns of `m` (modified Gram-Schmidt, two projection
/// passes, positive diagonal). Errors if the columns are numerically
/// dependent.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(mgs(m)?.0)
}

/// Gram-Schmidt factorization `m = Q R` with `Q` orthonormal (dim x k) and
/// `R` upper triangular (k x k) with positive diagonal.
pub fn mgs(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (dim, k) = m.shape();
    if k == 0 || k > dim {
        return Err(Error::InvalidFrame {
            reason: format!("frame shape {dim}x{k}"),
        });
    }
    let mut q = m.clone();
    let mut r = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let col_norm0 = q.column(j).norm();
        // Two projection passes ("twice is enough") keep Q orthonormal to
        // machine precision even for ill-conditioned inputs.
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let rij = qi.dot(&q.column(j));
                r[(i, j)] += rij;
                let updated = q.column(j) - qi * rij;
                q.set_column(j, &updated);
            }
        }
        let nrm = q.column(j).norm();
        if !nrm.is_finite() || nrm <= RANK_TOL * col_norm0.max(1e-300) {
            return Err(Error::InvalidFrame {
                reason: format!("column {j} numerically dependent (residual {nrm:.3e})"),
            });
        }
        r[(j, j)] = nrm;
        let scaled = q.column(j) / nrm;
        q.set_column(j, &scaled);
    }
    Ok((q, r))
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values().min()
}

/// Solve `a x = b` by full-pivot LU; errors on singular `a`.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().full_piv_lu();
    lu.solve(b).ok_or(Error::DegenerateSplitting { cond: f64::INFINITY })
}

/// Invert a small square matrix; errors on singularity.
pub fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or(Error::DegenerateSplitting { cond: f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mgs_reproduces_input() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let (q, r) = mgs(&m).unwrap();
        let qr = &q * &r;
        assert_relative_eq!(qr, m, epsilon = 1e-12);
        let qtq = q.transpose() * &q;
        assert_relative_eq!(qtq, DMatrix::identity(2, 2), epsilon = 1e-13);
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
    }

    #[test]
    fn mgs_rejects_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(mgs(&m).is_err());
    }

    #[test]
    fn mgs_is_continuous_near_identity() {
        // A tiny perturbation must not flip any column sign.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1.0]);
        let (q, _) = mgs(&m).unwrap();
        assert!(q[(0, 0)] > 0.99 && q[(1, 1)] > 0.99);
    }
}
