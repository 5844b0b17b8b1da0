//! Built-in reference systems with exactly known spectra.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::{Point, SmoothSystem, Space, SystemMetadata};
use crate::error::{Error, Result};

/// The hyperbolic torus automorphism `x -> [[2,1],[1,1]] x  (mod 1)`.
///
/// Eigenvalues are `(3 +/- sqrt 5)/2`; the matrix is symmetric, so the
/// expanding and contracting eigendirections are orthogonal and constant.
#[derive(Debug, Clone, Default)]
pub struct Cat2;

impl Cat2 {
    /// Expanding eigenvalue `(3 + sqrt 5)/2 ~ 2.618034`.
    pub fn expansion_rate() -> f64 {
        (3.0 + 5.0_f64.sqrt()) / 2.0
    }

    /// Contracting eigenvalue `(3 - sqrt 5)/2 = 1/expansion_rate`.
    pub fn contraction_rate() -> f64 {
        (3.0 - 5.0_f64.sqrt()) / 2.0
    }

    /// Unit eigenvector of the expanding direction: `(1, (sqrt 5 - 1)/2)`
    /// normalized.
    pub fn unstable_direction() -> DVector<f64> {
        let v = DVector::from_column_slice(&[1.0, (5.0_f64.sqrt() - 1.0) / 2.0]);
        let n = v.norm();
        v / n
    }

    /// Unit eigenvector of the contracting direction (orthogonal to the
    /// expanding one).
    pub fn stable_direction() -> DVector<f64> {
        let u = Self::unstable_direction();
        DVector::from_column_slice(&[-u[1], u[0]])
    }

    fn matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
    }

    fn matrix_inverse() -> DMatrix<f64> {
        // Integer inverse of a determinant-one integer matrix: exact.
        DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0])
    }
}

impl SmoothSystem for Cat2 {
    fn dim(&self) -> usize {
        2
    }

    fn space(&self) -> Space {
        Space::Torus(2)
    }

    fn metadata(&self) -> SystemMetadata {
        SystemMetadata {
            name: "cat2".to_string(),
            params: json!({ "matrix": [[2, 1], [1, 1]] }),
        }
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        expect_space(x, self.space())?;
        Point::new(self.space(), Self::matrix() * x.coords())
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        expect_space(x, self.space())?;
        Point::new(self.space(), Self::matrix_inverse() * x.coords())
    }

    fn tangent(&self, _x: &Point) -> Result<DMatrix<f64>> {
        Ok(Self::matrix())
    }

    fn tangent_backward(&self, _x: &Point) -> Result<DMatrix<f64>> {
        Ok(Self::matrix_inverse())
    }
}

/// The linear map `diag(4, 2, 1/8)` on `R^3`.
///
/// At its fixed point the per-axis exponents are `log 4`, `log 2`, `-log 8`
/// exactly, which makes it the reference case for split estimation and for
/// nested growth of a line inside a plane.
#[derive(Debug, Clone, Default)]
pub struct Diag3;

impl Diag3 {
    /// The three diagonal entries `(4, 2, 1/8)`.
    pub fn rates() -> [f64; 3] {
        [4.0, 2.0, 0.125]
    }

    fn apply(coords: &DVector<f64>, rates: &[f64; 3]) -> DVector<f64> {
        DVector::from_fn(3, |i, _| coords[i] * rates[i])
    }
}

impl SmoothSystem for Diag3 {
    fn dim(&self) -> usize {
        3
    }

    fn space(&self) -> Space {
        Space::Euclidean(3)
    }

    fn metadata(&self) -> SystemMetadata {
        SystemMetadata {
            name: "diag3".to_string(),
            params: json!({ "rates": [4.0, 2.0, 0.125] }),
        }
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        expect_space(x, self.space())?;
        Point::new(self.space(), Self::apply(x.coords(), &Self::rates()))
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        expect_space(x, self.space())?;
        Point::new(self.space(), Self::apply(x.coords(), &[0.25, 0.5, 8.0]))
    }

    fn tangent(&self, _x: &Point) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_column_slice(&Self::rates())))
    }

    fn tangent_backward(&self, _x: &Point) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_column_slice(&[0.25, 0.5, 8.0])))
    }
}

/// Shared validation for systems that require an exact coordinate count.
pub(super) fn expect_dim(x: &Point, dim: usize) -> Result<()> {
    if x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.dim(),
        });
    }
    Ok(())
}

/// Reject points from a different phase space before touching coordinates.
fn expect_space(x: &Point, space: Space) -> Result<()> {
    if x.space() != space {
        return Err(Error::SpaceMismatch {
            left: x.space().tag(),
            right: space.tag(),
        });
    }
    Ok(())
}
