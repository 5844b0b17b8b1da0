//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! (indices, measured values, budgets) for a caller to report *which* check
//! failed and where, without re-running the computation.

use thiserror::Error;

/// Errors produced by orbit construction, bundle estimation, time-set
/// selection, and disk growth.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A point or matrix had the wrong ambient dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two points from different phase spaces were combined.
    #[error("phase-space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    /// `backward` followed by `forward` (or vice versa) failed to return to
    /// the starting point within the inverse-consistency tolerance.
    #[error("inverse inconsistency at step {step}: roundtrip error {residual:.3e} exceeds {tol:.1e}")]
    InverseInconsistency { step: i64, residual: f64, tol: f64 },

    /// Newton inversion did not converge.
    #[error("numerical inversion failed after {iters} iterations (residual {residual:.3e})")]
    InversionFailure { iters: usize, residual: f64 },

    /// An orbit index outside the constructed window was requested.
    #[error("orbit index {index} outside stored window [{lo}, {hi}]")]
    OrbitWindow { index: i64, lo: i64, hi: i64 },

    /// A driven system was stepped past its stored base window.
    #[error("base orbit window exhausted at clock {clock} (stored range [{lo}, {hi}])")]
    BaseWindowExhausted { clock: i64, lo: i64, hi: i64 },

    /// A frame was not orthonormal within tolerance, or had invalid shape.
    #[error("invalid frame: {reason}")]
    InvalidFrame { reason: String },

    /// The restriction of a matrix to a subspace was numerically rank
    /// deficient, so its mini-norm is not meaningful.
    #[error("singular restriction: smallest singular value {sigma_min:.3e} below rank threshold")]
    SingularRestriction { sigma_min: f64 },

    /// Requested bundle dimensions do not fit the ambient dimension.
    #[error("bundle dimensions {dims:?} incompatible with ambient dimension {ambient}")]
    BundleDims { dims: Vec<usize>, ambient: usize },

    /// The settling window does not fit inside the orbit segment.
    #[error("settle window {settle} leaves no orbit indices (orbit window [{lo}, {hi}])")]
    SettleWindow { settle: usize, lo: i64, hi: i64 },

    /// Splitting estimation finished with an invariance residual above
    /// tolerance: settle too short or exponent gap too small.
    #[error("splitting did not settle: invariance residual {residual:.3e} exceeds {tol:.1e}")]
    SplitNonConvergence { residual: f64, tol: f64 },

    /// Spectrum computation requested for a bundle of unsupported dimension.
    #[error("bundle dimension {dim} exceeds supported maximum {max}")]
    BundleDimTooLarge { dim: usize, max: usize },

    /// An operation received an empty step-log sequence.
    #[error("empty step-log sequence")]
    EmptySequence,

    /// Two sequences that must share an orbit and block length differ.
    #[error("mismatched sequences: lengths {left} vs {right} (or block lengths differ)")]
    MismatchedSequences { left: usize, right: usize },

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value {value} for {what}")]
    NonFinite { what: String, value: f64 },

    /// Threshold parameters violate their required ordering.
    #[error("threshold ordering violated: {relation}")]
    ThresholdOrder { relation: String },

    /// A sequence value exceeded the declared upper bound `L`.
    #[error("sequence value {value} at index {index} exceeds bound {bound}")]
    BoundExceeded { index: usize, value: f64, bound: f64 },

    /// Oblique decomposition against E ⊕ F is singular.
    #[error("degenerate splitting: E and F frames do not span a complement (condition {cond:.3e})")]
    DegenerateSplitting { cond: f64 },

    /// The zero vector has no cone membership.
    #[error("cone membership undefined for the zero vector")]
    ZeroVector,

    /// Mesh construction parameters are inconsistent.
    #[error("invalid mesh parameters: {reason}")]
    MeshParams { reason: String },

    /// A node fell outside the admissible cone during a push.
    #[error("cone violation at node {node:?}: tilt {tilt:.3e} exceeds width {width:.3e} after step {step}")]
    ConeViolation { node: Vec<i32>, tilt: f64, width: f64, step: i64 },

    /// The pushed mesh stopped being a graph over the base subspace.
    #[error("fold-over at node {node:?} after step {step}: image is not a graph")]
    FoldOver { node: Vec<i32>, step: i64 },

    /// The pushed disk does not cover the requested cut radius.
    #[error("cut failed: graph domain radius {have:.3e} smaller than requested {need:.3e}")]
    CutTooSmall { have: f64, need: f64 },

    /// A mesh grew beyond the node budget while tracking an expansion burst.
    #[error("mesh node budget exceeded: {nodes} nodes (budget {budget})")]
    MeshBudget { nodes: usize, budget: usize },

    /// A disk radius exceeded the safe chart size on a torus.
    #[error("chart bound exceeded: radius {radius:.3e} beyond safe torus chart {bound:.3e}")]
    ChartBound { radius: f64, bound: f64 },

    /// Graph meshes are implemented for base dimensions 1 and 2.
    #[error("disk meshes of base dimension {dim} are not supported (1 and 2 are)")]
    DiskDimUnsupported { dim: usize },

    /// Growth was requested with an empty hyperbolic-time set.
    #[error("no hyperbolic times available up to horizon {horizon}")]
    NoHyperbolicTimes { horizon: u64 },

    /// The Cauchy gaps did not fall below tolerance within the budget.
    #[error("growth did not converge within {steps} steps: last C0 gap {c0:.3e}, C1 gap {c1:.3e}")]
    GrowthNotConverged { steps: u64, c0: f64, c1: f64 },

    /// The measured distortion constant exceeded its cap.
    #[error("certificate failure: measured distortion T = {t:.6} exceeds cap {cap:.6}")]
    CertificateFailure { t: f64, cap: f64 },

    /// Calibration halved a parameter to its floor without the probe
    /// window passing.
    #[error("calibration floor reached at (a = {a:.3e}, r = {r:.3e}) without the probe checks passing")]
    CalibrationFloor { a: f64, r: f64 },

    /// Backward contraction failed during growth or verification.
    #[error("backward contraction violated at depth {depth}: ratio {ratio:.6} exceeds {bound:.6}")]
    ContractionViolation { depth: u64, ratio: f64, bound: f64 },

    /// Tangent alignment failed during growth.
    #[error("tangent alignment violated after step {step}: deviation {deviation:.3e} exceeds bound {bound:.3e}")]
    AlignmentViolation { step: i64, deviation: f64, bound: f64 },

    /// Estimated exponents do not satisfy the ordering a nested growth needs.
    #[error("exponent ordering violated: {relation}")]
    ExponentOrder { relation: String },

    /// Invalid generator specification.
    #[error("invalid generator spec: {reason}")]
    InvalidSpec { reason: String },

    /// Brute-force evaluation refused a sequence beyond its budget.
    #[error("brute-force budget exceeded: N = {n} > {budget}")]
    BruteForceBudget { n: usize, budget: usize },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
