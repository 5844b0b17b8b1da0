//! Phase spaces, invertible systems, and cached orbit segments.
//!
//! A [`SmoothSystem`] is an invertible map with an explicit tangent cocycle:
//! `forward`/`backward` move points, `tangent`/`tangent_backward` move
//! tangent vectors. Implementations must supply an analytic inverse or opt
//! into Newton inversion via [`NewtonInverted`]; either way the roundtrip
//! `backward(forward(x)) = x` must hold to [`TOL_INV`].
//!
//! Orbits are materialized once as an [`OrbitSegment`] covering a two-sided
//! index window `[-n_backward, n_forward]`, with the one-step Jacobians
//! cached alongside. All downstream analytics (bundle settling, step logs,
//! disk growth) address orbit points by signed index through that cache, so
//! a system's maps are evaluated exactly once per step.

mod builtins;
mod skew;

pub use builtins::{Cat2, Diag3};
pub use skew::{skew_nonuniform, FiberBlock, RateProcess, SkewSystem, MAX_BLOCK_DIM};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Roundtrip tolerance for `backward(forward(x)) = x`.
pub const TOL_INV: f64 = 1e-12;

/// Tolerance for the finite-difference cross-check of `tangent`.
pub const TOL_FD: f64 = 1e-6;

/// Phase space of a system: a flat torus or a Euclidean space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `[0,1)^d` with per-coordinate wraparound.
    Torus(usize),
    /// `R^d`.
    Euclidean(usize),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Torus(d) | Space::Euclidean(d) => *d,
        }
    }

    /// Identifier string, e.g. `torus-2` or `euclidean-3`.
    pub fn tag(&self) -> String {
        match self {
            Space::Torus(d) => format!("torus-{d}"),
            Space::Euclidean(d) => format!("euclidean-{d}"),
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag())
    }
}

/// A point of a phase space. Torus coordinates are stored wrapped to `[0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    space: Space,
    coords: DVector<f64>,
}

impl Point {
    /// Build a point, wrapping torus coordinates into `[0,1)`.
    pub fn new(space: Space, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: coords.len(),
            });
        }
        let coords = match space {
            Space::Torus(_) => coords.map(wrap_unit),
            Space::Euclidean(_) => coords,
        };
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("coordinate {i}"),
                    value: c,
                });
            }
        }
        Ok(Self { space, coords })
    }

    pub fn from_slice(space: Space, coords: &[f64]) -> Result<Self> {
        Self::new(space, DVector::from_column_slice(coords))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The point displaced by an ambient vector (wrapped on a torus).
    pub fn displaced(&self, offset: &DVector<f64>) -> Result<Point> {
        Point::new(self.space, &self.coords + offset)
    }
}

/// Wrap a coordinate into `[0,1)`.
fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can return exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Wrap a displacement component into `(-0.5, 0.5]` (nearest torus image).
fn wrap_half(d: f64) -> f64 {
    let mut w = d - d.round();
    if w <= -0.5 {
        w += 1.0;
    }
    w
}

fn check_same_space(y: &Point, z: &Point) -> Result<()> {
    if y.space != z.space {
        return Err(Error::SpaceMismatch {
            left: y.space.tag(),
            right: z.space.tag(),
        });
    }
    Ok(())
}

/// Displacement from `y` to `z` in the chart of `y`: the plain difference on
/// Euclidean space, the per-coordinate nearest-image difference on a torus.
pub fn chart_offset(y: &Point, z: &Point) -> Result<DVector<f64>> {
    check_same_space(y, z)?;
    let raw = z.coords() - y.coords();
    Ok(match y.space {
        Space::Torus(_) => raw.map(wrap_half),
        Space::Euclidean(_) => raw,
    })
}

/// Distance in the chart of `y`: Euclidean norm of [`chart_offset`].
///
/// On a torus this is the minimum over images per coordinate, which agrees
/// with the geodesic distance for separations below half the fundamental
/// domain -- the only regime the disk machinery operates in.
pub fn chart_distance(y: &Point, z: &Point) -> Result<f64> {
    Ok(chart_offset(y, z)?.norm())
}

/// Name and parameter record describing a system instance.
#[derive(Debug, Clone)]
pub struct SystemMetadata {
    pub name: String,
    pub params: serde_json::Value,
}

/// An invertible map with explicit tangent data.
///
/// `tangent_backward(x)` must equal `tangent(backward(x))^{-1}`; the default
/// implementation computes exactly that, and concrete systems may override
/// it with an analytic form.
pub trait SmoothSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn space(&self) -> Space;
    fn metadata(&self) -> SystemMetadata;

    fn forward(&self, x: &Point) -> Result<Point>;
    fn backward(&self, x: &Point) -> Result<Point>;

    /// The Jacobian `Df(x)` as a `dim x dim` matrix.
    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>>;

    /// The Jacobian of the inverse at `x`, i.e. `Df(f^{-1} x)^{-1}`.
    fn tangent_backward(&self, x: &Point) -> Result<DMatrix<f64>> {
        let pre = self.backward(x)?;
        linalg::invert(&self.tangent(&pre)?)
    }
}

/// One application of `forward`.
pub fn step(system: &dyn SmoothSystem, x: &Point) -> Result<Point> {
    system.forward(x)
}

/// The Jacobian at `x` (trait passthrough, named for call-site clarity).
pub fn tangent_at(system: &dyn SmoothSystem, x: &Point) -> Result<DMatrix<f64>> {
    system.tangent(x)
}

/// Central finite-difference Jacobian, the independent cross-check for
/// [`tangent_at`]. Uses chart offsets so torus wraparound cancels.
pub fn fd_tangent(system: &dyn SmoothSystem, x: &Point, h: f64) -> Result<DMatrix<f64>> {
    let dim = system.dim();
    let mut j = DMatrix::<f64>::zeros(dim, dim);
    for c in 0..dim {
        let mut e = DVector::zeros(dim);
        e[c] = h;
        let plus = system.forward(&x.displaced(&e)?)?;
        e[c] = -h;
        let minus = system.forward(&x.displaced(&e)?)?;
        let diff = chart_offset(&minus, &plus)? / (2.0 * h);
        j.set_column(c, &diff);
    }
    Ok(j)
}

/// Maximum roundtrip residual `d(backward(forward(x)), x)` over `samples`
/// points drawn uniformly from the chart cube, as a consistency probe.
pub fn probe_inverse_consistency(
    system: &dyn SmoothSystem,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = rng::stream(seed, "inverse-probe", 0);
    let dim = system.dim();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let coords = DVector::from_fn(dim, |_, _| rng.random::<f64>());
        let x = Point::new(system.space(), coords)?;
        let roundtrip = system.backward(&system.forward(&x)?)?;
        worst = worst.max(chart_distance(&x, &roundtrip)?);
    }
    Ok(worst)
}

/// A finite orbit window `x_{-B}, ..., x_0, ..., x_N` with cached Jacobians
/// `Df(x_j)` for `j` in `[-B, N-1]`.
#[derive(Debug, Clone)]
pub struct OrbitSegment {
    points: Vec<Point>,
    jacobians: Vec<DMatrix<f64>>,
    n_backward: i64,
    n_forward: i64,
}

impl OrbitSegment {
    /// Signed index range `(lo, hi) = (-n_backward, n_forward)`, inclusive.
    pub fn range(&self) -> (i64, i64) {
        (-self.n_backward, self.n_forward)
    }

    pub fn n_forward(&self) -> i64 {
        self.n_forward
    }

    pub fn n_backward(&self) -> i64 {
        self.n_backward
    }

    /// The basepoint `x_0`.
    pub fn base(&self) -> &Point {
        self.point(0).expect("orbit always contains index 0")
    }

    pub fn point(&self, j: i64) -> Result<&Point> {
        let (lo, hi) = self.range();
        if j < lo || j > hi {
            return Err(Error::OrbitWindow { index: j, lo, hi });
        }
        Ok(&self.points[(j + self.n_backward) as usize])
    }

    /// The Jacobian `Df(x_j)`, available for `j` in `[-B, N-1]`.
    pub fn jacobian(&self, j: i64) -> Result<&DMatrix<f64>> {
        let (lo, hi) = self.range();
        if j < lo || j >= hi {
            return Err(Error::OrbitWindow { index: j, lo, hi: hi - 1 });
        }
        Ok(&self.jacobians[(j + self.n_backward) as usize])
    }

    pub fn dim(&self) -> usize {
        self.base().dim()
    }
}

/// Materialize the orbit window `[-n_backward, n_forward]` around `x0`.
///
/// Backward steps are validated on the fly: after computing `x_{j-1}` we
/// require `forward(x_{j-1})` to land back on `x_j` within [`TOL_INV`], so a
/// drifting inverse is caught at construction rather than corrupting every
/// later analysis.
pub fn make_orbit(
    system: &dyn SmoothSystem,
    x0: &Point,
    n_forward: i64,
    n_backward: i64,
) -> Result<OrbitSegment> {
    assert!(n_forward >= 0 && n_backward >= 0, "window lengths must be nonnegative");
    if x0.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: x0.dim(),
        });
    }
    let mut backward_points = Vec::with_capacity(n_backward as usize);
    let mut x = x0.clone();
    for k in 1..=n_backward {
        let prev = system.backward(&x)?;
        let roundtrip = system.forward(&prev)?;
        let residual = chart_distance(&roundtrip, &x)?;
        if residual > TOL_INV {
            return Err(Error::InverseInconsistency {
                step: -k,
                residual,
                tol: TOL_INV,
            });
        }
        backward_points.push(prev.clone());
        x = prev;
    }
    backward_points.reverse();

    let mut points = backward_points;
    points.push(x0.clone());
    let mut x = x0.clone();
    for _ in 0..n_forward {
        let next = system.forward(&x)?;
        points.push(next.clone());
        x = next;
    }

    let mut jacobians = Vec::with_capacity(points.len().saturating_sub(1));
    for p in points.iter().take(points.len() - 1) {
        jacobians.push(system.tangent(p)?);
    }

    Ok(OrbitSegment {
        points,
        jacobians,
        n_backward,
        n_forward,
    })
}

/// Wrap a forward-only map with a Newton inverse.
///
/// `backward` solves `forward(y) = x` by damped-free Newton iteration in the
/// chart of `x`, starting from `x` itself. Suitable for systems whose inverse
/// branch containing `x` is the one of interest and whose Jacobian is
/// invertible along the iteration.
pub struct NewtonInverted<S: SmoothSystem> {
    inner: S,
    max_iters: usize,
}

impl<S: SmoothSystem> NewtonInverted<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, max_iters: 50 }
    }
}

impl<S: SmoothSystem> SmoothSystem for NewtonInverted<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn space(&self) -> Space {
        self.inner.space()
    }

    fn metadata(&self) -> SystemMetadata {
        let inner = self.inner.metadata();
        SystemMetadata {
            name: format!("newton-inverted({})", inner.name),
            params: inner.params,
        }
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        self.inner.forward(x)
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        let mut y = x.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_iters {
            let fy = self.inner.forward(&y)?;
            let err = chart_offset(&fy, x)?;
            residual = err.norm();
            if residual <= TOL_INV {
                return Ok(y);
            }
            let jac = self.inner.tangent(&y)?;
            let delta = linalg::solve(&jac, &err)?;
            y = y.displaced(&delta)?;
        }
        // One more residual check: the last displacement may have finished
        // the job.
        let fy = self.inner.forward(&y)?;
        let final_residual = chart_distance(&fy, x)?;
        if final_residual <= TOL_INV {
            return Ok(y);
        }
        Err(Error::InversionFailure {
            iters: self.max_iters,
            residual: residual.min(final_residual),
        })
    }

    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.inner.tangent(x)
    }
}

/// The inverse system: `forward` and `backward` swapped, tangents likewise.
///
/// Stable objects of a system are the unstable objects of its inverse, so
/// the one disk-growing code path serves both sides through this wrapper.
pub struct InverseSystem<S: SmoothSystem> {
    inner: S,
}

impl<S: SmoothSystem> InverseSystem<S> {
    pub fn new(inner: S) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

/// References to systems are systems, so borrowed and dynamically
/// selected maps compose with the generic wrappers ([`InverseSystem`],
/// [`NewtonInverted`]).
impl<S: SmoothSystem + ?Sized> SmoothSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn space(&self) -> Space {
        (**self).space()
    }

    fn metadata(&self) -> SystemMetadata {
        (**self).metadata()
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        (**self).forward(x)
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        (**self).backward(x)
    }

    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>> {
        (**self).tangent(x)
    }

    fn tangent_backward(&self, x: &Point) -> Result<DMatrix<f64>> {
        (**self).tangent_backward(x)
    }
}

/// Boxed systems likewise.
impl SmoothSystem for Box<dyn SmoothSystem> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn space(&self) -> Space {
        (**self).space()
    }

    fn metadata(&self) -> SystemMetadata {
        (**self).metadata()
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        (**self).forward(x)
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        (**self).backward(x)
    }

    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>> {
        (**self).tangent(x)
    }

    fn tangent_backward(&self, x: &Point) -> Result<DMatrix<f64>> {
        (**self).tangent_backward(x)
    }
}

impl<S: SmoothSystem> SmoothSystem for InverseSystem<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn space(&self) -> Space {
        self.inner.space()
    }

    fn metadata(&self) -> SystemMetadata {
        let inner = self.inner.metadata();
        SystemMetadata {
            name: format!("inverse({})", inner.name),
            params: inner.params,
        }
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        self.inner.backward(x)
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        self.inner.forward(x)
    }

    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.inner.tangent_backward(x)
    }

    fn tangent_backward(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.inner.tangent(x)
    }
}
