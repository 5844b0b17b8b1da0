//! Tangent subspaces, splittings along orbits, and restricted-cocycle norms.
//!
//! A [`Subspace`] is an orthonormal frame; the two norms that drive every
//! later selection are
//!
//! * `mini_norm(A, U)`  = smallest singular value of `A` restricted to `U`
//!   (the reciprocal of `|| (A|_U)^{-1} ||` when the restriction is
//!   invertible onto its image), and
//! * `restricted_norm(A, U)` = largest singular value of the restriction.
//!
//! A [`SplittingField`] assigns bundles `E, F (, G)` to every point of an
//! orbit window. [`estimate_splitting`] builds one by settling: the bundle
//! with the largest exponents is the forward image of a canonical seed frame
//! pushed `settle` steps, the smallest is the backward analogue, and an
//! intermediate bundle is recovered as the principal intersection of the
//! forward and backward flags. Bundle dimensions are therefore assigned by
//! decreasing exponent: `E` on top, then `F`, then `G`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::phase::OrbitSegment;

/// Orthonormality tolerance for accepting an externally supplied frame.
pub const TOL_FRAME: f64 = 1e-12;

/// Invariance residual a settled splitting must reach.
pub const TOL_SPLIT: f64 = 1e-6;

/// Largest bundle dimension for which full spectra are computed.
pub const MAX_BUNDLE_DIM: usize = 3;

/// Relative threshold below which a restriction counts as rank deficient.
const RANK_REL: f64 = 1e-14;

/// A linear subspace of `R^dim`, stored as a `dim x k` orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    frame: DMatrix<f64>,
}

impl Subspace {
    /// Accept a frame that is already orthonormal within [`TOL_FRAME`].
    pub fn from_orthonormal(frame: DMatrix<f64>) -> Result<Self> {
        let (dim, k) = frame.shape();
        if k == 0 || k > dim {
            return Err(Error::InvalidFrame {
                reason: format!("frame shape {dim}x{k}"),
            });
        }
        let gram = frame.transpose() * &frame;
        let defect = (&gram - DMatrix::identity(k, k)).abs().max();
        if defect > TOL_FRAME {
            return Err(Error::InvalidFrame {
                reason: format!("orthonormality defect {defect:.3e} exceeds {TOL_FRAME:.1e}"),
            });
        }
        Ok(Self { frame })
    }

    /// Span of arbitrary (full-rank) columns; orthonormalizes internally.
    pub fn span(columns: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            frame: linalg::orthonormalize(columns)?,
        })
    }

    /// The coordinate subspace spanned by the given axes.
    pub fn axes(ambient: usize, cols: &[usize]) -> Result<Self> {
        let mut frame = DMatrix::<f64>::zeros(ambient, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            if c >= ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: c + 1,
                });
            }
            frame[(c, j)] = 1.0;
        }
        Self::from_orthonormal(frame)
    }

    /// Span of a single vector.
    pub fn line(v: &nalgebra::DVector<f64>) -> Result<Self> {
        Self::span(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Dimension of the subspace itself.
    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Concatenate two frames into the span of their union.
    pub fn direct_sum(&self, other: &Subspace) -> Result<Subspace> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: other.ambient_dim(),
            });
        }
        let mut cols = self.frame.clone().resize_horizontally(self.dim() + other.dim(), 0.0);
        for j in 0..other.dim() {
            cols.set_column(self.dim() + j, &other.frame.column(j));
        }
        Subspace::span(&cols)
    }
}

/// Smallest singular value of `A` restricted to `U`, i.e. of `A * frame(U)`.
///
/// Errors with [`Error::SingularRestriction`] when the restriction is
/// numerically rank deficient, so callers never take `log 0` silently.
pub fn mini_norm(a: &DMatrix<f64>, u: &Subspace) -> Result<f64> {
    check_operator(a, u)?;
    let m = a * u.frame();
    let sv = m.singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo <= RANK_REL * hi.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularRestriction { sigma_min: lo });
    }
    Ok(lo)
}

/// Largest singular value of `A` restricted to `U`.
pub fn restricted_norm(a: &DMatrix<f64>, u: &Subspace) -> Result<f64> {
    check_operator(a, u)?;
    Ok(linalg::operator_norm(&(a * u.frame())))
}

fn check_operator(a: &DMatrix<f64>, u: &Subspace) -> Result<()> {
    if a.nrows() != a.ncols() || a.ncols() != u.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: u.ambient_dim(),
            got: a.ncols(),
        });
    }
    Ok(())
}

/// Distance between equal-dimensional subspaces: the operator norm of the
/// difference of orthogonal projections, equivalently the sine of the
/// largest principal angle. Always in `[0, 1]`.
///
/// Computed as the larger of `||(I - P_U) V||` and `||(I - P_V) U||`, which
/// is symmetric by construction and accurate for small angles (no
/// cancellation through cosines).
pub fn grassmann_distance(u: &Subspace, v: &Subspace) -> Result<f64> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: u.ambient_dim(),
            got: v.ambient_dim(),
        });
    }
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let residual = |a: &Subspace, b: &Subspace| {
        // (I - P_a) b = b - a (a^T b)
        let proj = a.frame() * (a.frame().transpose() * b.frame());
        linalg::operator_norm(&(b.frame() - proj))
    };
    let d = residual(u, v).max(residual(v, u));
    Ok(d.min(1.0))
}

/// Whether `v` lies in the cone of width `a` around `E` against `F`:
/// decompose `v = v_E + v_F` obliquely along `E (+) F` and test
/// `||v_F|| <= a ||v_E||` (boundary inclusive).
///
/// Requires `dim E + dim F` to equal the ambient dimension.
pub fn cone_contains(
    e: &Subspace,
    f: &Subspace,
    a: f64,
    v: &nalgebra::DVector<f64>,
) -> Result<bool> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (ce, cf) = oblique_components(e, f, v)?;
    Ok(cf <= a * ce)
}

/// Oblique component norms `(||v_E||, ||v_F||)` of `v` along `E (+) F`.
fn oblique_components(
    e: &Subspace,
    f: &Subspace,
    v: &nalgebra::DVector<f64>,
) -> Result<(f64, f64)> {
    let dim = e.ambient_dim();
    if f.ambient_dim() != dim || v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f.ambient_dim().max(v.len()),
        });
    }
    if e.dim() + f.dim() != dim {
        return Err(Error::BundleDims {
            dims: vec![e.dim(), f.dim()],
            ambient: dim,
        });
    }
    let mut basis = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..e.dim() {
        basis.set_column(j, &e.frame().column(j));
    }
    for j in 0..f.dim() {
        basis.set_column(e.dim() + j, &f.frame().column(j));
    }
    let coeffs = linalg::solve(&basis, v)?;
    let ce = coeffs.rows(0, e.dim()).norm();
    let cf = coeffs.rows(e.dim(), f.dim()).norm();
    Ok((ce, cf))
}

/// Worst-case cone tilt of a whole frame: the maximum of `||v_F|| / ||v_E||`
/// over unit vectors `v` in the frame's span, computed as
/// `sigma_max(B A^{-1})` where `A`, `B` are the oblique `E`/`F` coordinate
/// blocks of the frame. Returns infinity when the span folds over `E`.
pub fn cone_frame_tilt(e: &Subspace, f: &Subspace, frame: &Subspace) -> Result<f64> {
    let dim = e.ambient_dim();
    if f.ambient_dim() != dim || frame.ambient_dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f.ambient_dim().max(frame.ambient_dim()),
        });
    }
    if e.dim() + f.dim() != dim {
        return Err(Error::BundleDims {
            dims: vec![e.dim(), f.dim()],
            ambient: dim,
        });
    }
    let mut basis = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..e.dim() {
        basis.set_column(j, &e.frame().column(j));
    }
    for j in 0..f.dim() {
        basis.set_column(e.dim() + j, &f.frame().column(j));
    }
    let inv = linalg::invert(&basis)?;
    let coords = inv * frame.frame();
    let a_block = coords.rows(0, e.dim()).clone_owned();
    let b_block = coords.rows(e.dim(), f.dim()).clone_owned();
    let a_inv = match linalg::invert(&(a_block.transpose() * &a_block)) {
        Ok(gram_inv) => gram_inv * a_block.transpose(),
        Err(_) => return Ok(f64::INFINITY),
    };
    Ok(linalg::operator_norm(&(b_block * a_inv)))
}

/// Requested bundle dimensions for a splitting, ordered by decreasing
/// exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDims {
    pub e: usize,
    pub f: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<usize>,
}

impl SplitDims {
    pub fn two(e: usize, f: usize) -> Self {
        Self { e, f, g: None }
    }

    pub fn three(e: usize, f: usize, g: usize) -> Self {
        Self { e, f, g: Some(g) }
    }

    pub fn total(&self) -> usize {
        self.e + self.f + self.g.unwrap_or(0)
    }

    fn as_vec(&self) -> Vec<usize> {
        let mut v = vec![self.e, self.f];
        if let Some(g) = self.g {
            v.push(g);
        }
        v
    }
}

enum BundleStore {
    Constant(Subspace),
    PerIndex(Vec<Subspace>),
}

impl BundleStore {
    fn at(&self, offset: usize) -> &Subspace {
        match self {
            BundleStore::Constant(s) => s,
            BundleStore::PerIndex(v) => &v[offset],
        }
    }
}

/// Bundles `E, F (, G)` assigned to every orbit index in a window.
pub struct SplittingField {
    e: BundleStore,
    f: BundleStore,
    g: Option<BundleStore>,
    lo: i64,
    hi: i64,
    settle_used: usize,
    residual: f64,
}

impl SplittingField {
    /// Covered orbit-index range, inclusive.
    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn dims(&self) -> SplitDims {
        SplitDims {
            e: self.e.at(0).dim(),
            f: self.f.at(0).dim(),
            g: self.g.as_ref().map(|g| g.at(0).dim()),
        }
    }

    pub fn settle_used(&self) -> usize {
        self.settle_used
    }

    /// Largest one-step invariance defect observed across the window.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    fn offset(&self, j: i64) -> Result<usize> {
        if j < self.lo || j > self.hi {
            return Err(Error::OrbitWindow {
                index: j,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok((j - self.lo) as usize)
    }

    pub fn e_at(&self, j: i64) -> Result<&Subspace> {
        Ok(self.e.at(self.offset(j)?))
    }

    pub fn f_at(&self, j: i64) -> Result<&Subspace> {
        Ok(self.f.at(self.offset(j)?))
    }

    pub fn g_at(&self, j: i64) -> Result<&Subspace> {
        let g = self.g.as_ref().ok_or(Error::BundleDims {
            dims: vec![],
            ambient: 0,
        })?;
        Ok(g.at(self.offset(j)?))
    }

    pub fn has_g(&self) -> bool {
        self.g.is_some()
    }

    /// A splitting with the same bundles at every index of the orbit window;
    /// for systems whose invariant splitting is known in closed form.
    pub fn constant(
        orbit: &OrbitSegment,
        e: Subspace,
        f: Subspace,
        g: Option<Subspace>,
    ) -> Result<Self> {
        let ambient = orbit.dim();
        let total = e.dim() + f.dim() + g.as_ref().map_or(0, |s| s.dim());
        if total != ambient
            || e.ambient_dim() != ambient
            || f.ambient_dim() != ambient
            || g.as_ref().is_some_and(|s| s.ambient_dim() != ambient)
        {
            return Err(Error::BundleDims {
                dims: vec![e.dim(), f.dim(), g.as_ref().map_or(0, |s| s.dim())],
                ambient,
            });
        }
        let (lo, hi) = orbit.range();
        Ok(Self {
            e: BundleStore::Constant(e),
            f: BundleStore::Constant(f),
            g: g.map(BundleStore::Constant),
            lo,
            hi,
            settle_used: 0,
            residual: 0.0,
        })
    }

    /// Merge `E` and `F` into a single top bundle and promote `G` to the
    /// bottom, turning a three-bundle splitting into the two-bundle
    /// coarsening `(E ⊕ F, G)` over the same window.
    ///
    /// Errors with [`Error::BundleDims`] when there is no third bundle.
    pub fn coarsen_top(&self) -> Result<SplittingField> {
        let g = self.g.as_ref().ok_or_else(|| Error::BundleDims {
            dims: self.dims().as_vec(),
            ambient: self.e.at(0).ambient_dim(),
        })?;
        let e = match (&self.e, &self.f) {
            (BundleStore::Constant(e), BundleStore::Constant(f)) => {
                BundleStore::Constant(e.direct_sum(f)?)
            }
            _ => {
                let len = (self.hi - self.lo + 1) as usize;
                let mut merged = Vec::with_capacity(len);
                for offset in 0..len {
                    merged.push(self.e.at(offset).direct_sum(self.f.at(offset))?);
                }
                BundleStore::PerIndex(merged)
            }
        };
        let f = match g {
            BundleStore::Constant(s) => BundleStore::Constant(s.clone()),
            BundleStore::PerIndex(v) => BundleStore::PerIndex(v.clone()),
        };
        Ok(SplittingField {
            e,
            f,
            g: None,
            lo: self.lo,
            hi: self.hi,
            settle_used: self.settle_used,
            residual: self.residual,
        })
    }
}

/// Estimate the invariant splitting along an orbit by settling seed frames
/// for `settle` steps on each side.
///
/// For every covered index `j`:
///
/// * `E(x_j)` is the orthonormalized forward image of a fixed canonical
///   `dim E`-frame transported from `x_{j - settle}`,
/// * the bottom bundle is the backward analogue from `x_{j + settle}`,
/// * a middle bundle (three-bundle case) is the principal intersection of
///   the forward `(e+f)`-flag with the backward `(f+g)`-flag.
///
/// Seeds are leading (forward) and trailing (backward) canonical basis
/// columns: deterministic, and exact for axis-aligned splittings because
/// the settle iteration never leaves an invariant coordinate axis. A seed
/// degenerate for some system cannot fail silently: it surfaces through the
/// one-step invariance residual below.
///
/// The covered window is the orbit window shrunk by `settle` on both sides.
/// The one-step invariance residual is measured for every bundle across the
/// window; a residual above [`TOL_SPLIT`] is an error (settle too short or
/// exponent gap too small).
pub fn estimate_splitting(
    orbit: &OrbitSegment,
    dims: SplitDims,
    settle: usize,
) -> Result<SplittingField> {
    let ambient = orbit.dim();
    if dims.total() != ambient || dims.e == 0 || dims.f == 0 || dims.g == Some(0) {
        return Err(Error::BundleDims {
            dims: dims.as_vec(),
            ambient,
        });
    }
    let (lo, hi) = orbit.range();
    let settle_i = settle as i64;
    let (win_lo, win_hi) = (lo + settle_i, hi - settle_i);
    if settle == 0 || win_lo > win_hi {
        return Err(Error::SettleWindow { settle, lo, hi });
    }

    // Inverse Jacobians for the backward settles, computed once per index.
    let mut inverse_jacobians = Vec::with_capacity((hi - lo) as usize);
    for j in lo..hi {
        inverse_jacobians.push(linalg::invert(orbit.jacobian(j)?)?);
    }
    let inv_jac = |j: i64| &inverse_jacobians[(j - lo) as usize];

    let seed_frame = |leading: bool, k: usize| {
        let mut m = DMatrix::zeros(ambient, k);
        for c in 0..k {
            let row = if leading { c } else { ambient - k + c };
            m[(row, c)] = 1.0;
        }
        m
    };
    let fwd_seed = seed_frame(true, dims.e);
    let bwd_k = dims.g.unwrap_or(dims.f);
    let bwd_seed = seed_frame(false, bwd_k);
    let mid_seeds = dims.g.map(|g| {
        (
            seed_frame(true, dims.e + dims.f),
            seed_frame(false, dims.f + g),
        )
    });

    let settle_forward = |seed: &DMatrix<f64>, j: i64| -> Result<DMatrix<f64>> {
        let mut frame = linalg::orthonormalize(seed)?;
        for i in (j - settle_i)..j {
            frame = linalg::orthonormalize(&(orbit.jacobian(i)? * frame))?;
        }
        Ok(frame)
    };
    let settle_backward = |seed: &DMatrix<f64>, j: i64| -> Result<DMatrix<f64>> {
        let mut frame = linalg::orthonormalize(seed)?;
        for i in ((j)..(j + settle_i)).rev() {
            frame = linalg::orthonormalize(&(inv_jac(i) * frame))?;
        }
        Ok(frame)
    };

    let n = (win_hi - win_lo + 1) as usize;
    let mut e_frames = Vec::with_capacity(n);
    let mut f_frames = Vec::with_capacity(n);
    let mut g_frames: Vec<Subspace> = Vec::with_capacity(if dims.g.is_some() { n } else { 0 });
    for j in win_lo..=win_hi {
        let e = Subspace::from_orthonormal(settle_forward(&fwd_seed, j)?)?;
        match (dims.g, &mid_seeds) {
            (Some(_), Some((fwd_flag_seed, bwd_flag_seed))) => {
                let g = Subspace::from_orthonormal(settle_backward(&bwd_seed, j)?)?;
                let fwd_flag = settle_forward(fwd_flag_seed, j)?;
                let bwd_flag = settle_backward(bwd_flag_seed, j)?;
                let f = principal_intersection(&fwd_flag, &bwd_flag, dims.f)?;
                f_frames.push(f);
                g_frames.push(g);
            }
            _ => {
                let f = Subspace::from_orthonormal(settle_backward(&bwd_seed, j)?)?;
                f_frames.push(f);
            }
        }
        e_frames.push(e);
    }

    // One-step invariance: push each bundle by Df and compare with the
    // stored bundle at the next index.
    let mut residual = 0.0_f64;
    {
        let mut check = |frames: &[Subspace]| -> Result<()> {
            for (offset, pair) in frames.windows(2).enumerate() {
                let j = win_lo + offset as i64;
                let pushed = Subspace::span(&(orbit.jacobian(j)? * pair[0].frame()))?;
                residual = residual.max(grassmann_distance(&pushed, &pair[1])?);
            }
            Ok(())
        };
        check(&e_frames)?;
        check(&f_frames)?;
        if dims.g.is_some() {
            check(&g_frames)?;
        }
    }
    if residual > TOL_SPLIT {
        return Err(Error::SplitNonConvergence {
            residual,
            tol: TOL_SPLIT,
        });
    }

    Ok(SplittingField {
        e: BundleStore::PerIndex(e_frames),
        f: BundleStore::PerIndex(f_frames),
        g: dims.g.map(|_| BundleStore::PerIndex(g_frames)),
        lo: win_lo,
        hi: win_hi,
        settle_used: settle,
        residual,
    })
}

/// The `k` leading principal directions shared by two flags: SVD of
/// `U^T V` picks the directions of `span U` closest to `span V`.
fn principal_intersection(u: &DMatrix<f64>, v: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    let w = u.transpose() * v;
    let svd = w.svd(true, false);
    let u_rot = svd.u.as_ref().expect("left singular vectors requested");
    if k > u_rot.ncols() {
        return Err(Error::BundleDims {
            dims: vec![k],
            ambient: u_rot.ncols(),
        });
    }
    let lead = u_rot.columns(0, k).clone_owned();
    Subspace::span(&(u * lead))
}

/// Finite-window exponents of the restricted cocycle over `[j0, j0+len)`:
/// `(log sigma_min, log sigma_max)` of the `len`-step map restricted to the
/// bundle provided at `j0`, accumulated with per-step re-orthonormalization
/// so no overflow occurs at any window length.
pub(crate) fn restricted_window_logs(
    orbit: &OrbitSegment,
    start_frame: &Subspace,
    j0: i64,
    len: usize,
) -> Result<(f64, f64)> {
    assert!(len > 0, "window length must be positive");
    let k = start_frame.dim();
    let mut q = start_frame.frame().clone();
    let mut p = DMatrix::<f64>::identity(k, k);
    let mut p_inv = DMatrix::<f64>::identity(k, k);
    let mut log_p = 0.0_f64;
    let mut log_p_inv = 0.0_f64;
    for step in 0..len {
        let j = j0 + step as i64;
        let c = orbit.jacobian(j)? * &q;
        let (qn, r) = linalg::mgs(&c).map_err(|_| Error::SingularRestriction {
            sigma_min: 0.0,
        })?;
        q = qn;
        p = &r * &p;
        let s = p.norm();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonFinite {
                what: "restricted cocycle accumulation".to_string(),
                value: s,
            });
        }
        log_p += s.ln();
        p /= s;
        let r_inv = linalg::invert(&r).map_err(|_| Error::SingularRestriction { sigma_min: 0.0 })?;
        p_inv = &p_inv * &r_inv;
        let s_inv = p_inv.norm();
        log_p_inv += s_inv.ln();
        p_inv /= s_inv;
    }
    let log_max = log_p + linalg::operator_norm(&p).ln();
    let log_min = -(log_p_inv + linalg::operator_norm(&p_inv).ln());
    Ok((log_min, log_max))
}

/// Finite-window Lyapunov exponents per bundle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovEstimate {
    pub chi_e_minus: f64,
    pub chi_e_plus: f64,
    pub chi_f_minus: f64,
    pub chi_f_plus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_g_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_g_plus: Option<f64>,
    /// Window length the exponents were averaged over.
    pub window: u64,
}

/// `(1/N) log` of the mini-norm and restricted norm of the `N`-step cocycle
/// restricted to each bundle of `split`, starting at orbit index `0`.
pub fn lyapunov_estimates(
    orbit: &OrbitSegment,
    split: &SplittingField,
    n: usize,
) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let dims = split.dims();
    for d in dims.as_vec() {
        if d > MAX_BUNDLE_DIM {
            return Err(Error::BundleDimTooLarge {
                dim: d,
                max: MAX_BUNDLE_DIM,
            });
        }
    }
    let (lo, hi) = split.range();
    if lo > 0 || hi < n as i64 {
        return Err(Error::OrbitWindow {
            index: n as i64,
            lo,
            hi,
        });
    }
    let nf = n as f64;
    let (e_min, e_max) = restricted_window_logs(orbit, split.e_at(0)?, 0, n)?;
    let (f_min, f_max) = restricted_window_logs(orbit, split.f_at(0)?, 0, n)?;
    let (g_min, g_max) = if split.has_g() {
        let (a, b) = restricted_window_logs(orbit, split.g_at(0)?, 0, n)?;
        (Some(a / nf), Some(b / nf))
    } else {
        (None, None)
    };
    Ok(LyapunovEstimate {
        chi_e_minus: e_min / nf,
        chi_e_plus: e_max / nf,
        chi_f_minus: f_min / nf,
        chi_f_plus: f_max / nf,
        chi_g_minus: g_min,
        chi_g_plus: g_max,
        window: n as u64,
    })
}
