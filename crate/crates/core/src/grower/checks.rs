//! Backward-orbit checks on grown disks, with certified rounding envelopes.
//!
//! Every node position is a floating-point sample of the ideal disk, and
//! backward iteration amplifies that representation noise by the inverse
//! Jacobians.  A literal pointwise comparison therefore turns vacuous at
//! some depth no matter how the disk was computed.  The checks here carry a
//! first-order componentwise rounding envelope alongside each backward
//! orbit: `env_0 = NOISE_ULPS * eps * |x_0|` and
//! `env_{k} = |Df^{-1}(x_{k-1})| env_{k-1} + NOISE_ULPS * eps * |x_k|`
//! (componentwise absolute values).  A pairwise distance `d_k` with
//! uncertainty `u_k` (the sum of the two envelope norms) only counts as a
//! violation when `d_k > bound + u_k`, since then the true distance
//! `d ≥ d_k - u_k` genuinely exceeds the bound.  Each report also states
//! the depth to which the bound stayed resolvable above the envelope, so a
//! clean pass at unresolvable depths is disclosed rather than overclaimed.

use nalgebra::DVector;

use crate::bundle::grassmann_distance;
use crate::error::{Error, Result};
use crate::phase::{chart_distance, Point, SmoothSystem};
use crate::rng;
use rand::Rng;

use super::mesh::DiskMesh;
use super::LocalManifold;

/// Multiplicative slack on the backward-contraction bound, absorbing the
/// first-order terms the envelope does not model.
pub const CONTRACTION_SLACK: f64 = 1e-2;

/// Ulps of representation noise attributed to every stored coordinate.
pub const NOISE_ULPS: f64 = 8.0;

/// Random node pairs checked by [`verify_local_manifold`] on top of the
/// exhaustive node-versus-center sweep.
pub const VERIFY_PAIRS: usize = 1000;

/// Relative slack on the certificate ratio during verification.
pub const RATIO_EPS: f64 = 1e-9;

/// Absolute floor under the tangent-alignment bound.
pub const ALIGN_FLOOR: f64 = 1e-12;

/// Deepest backward window the growth loop checks contraction over; past
/// this the bound sits far below the rounding envelope of any double
/// precision orbit, so deeper checks add cost but no information.
pub const F2_DEPTH_CAP: u64 = 64;

/// A depth counts as resolved while every pair's envelope stays below this
/// fraction of its bound.
const RESOLVE_FRACTION: f64 = 0.1;

/// Backward orbits of a set of points together with their envelopes.
struct BackwardTrack {
    /// `points[i][k]` is node `i` iterated `k` steps backward.
    points: Vec<Vec<Point>>,
    /// `env[i][k]` is the Euclidean norm of the envelope vector of
    /// `points[i][k]`.
    env: Vec<Vec<f64>>,
}

fn backward_track(
    system: &dyn SmoothSystem,
    starts: &[&Point],
    depth: u64,
) -> Result<BackwardTrack> {
    let eps = f64::EPSILON;
    let mut points = Vec::with_capacity(starts.len());
    let mut env = Vec::with_capacity(starts.len());
    for &start in starts {
        let mut orbit = Vec::with_capacity(depth as usize + 1);
        let mut envs = Vec::with_capacity(depth as usize + 1);
        let mut env_vec: DVector<f64> = start.coords().map(|c| NOISE_ULPS * eps * c.abs());
        orbit.push(start.clone());
        envs.push(env_vec.norm());
        for _ in 0..depth {
            let here = orbit.last().expect("non-empty");
            let jac_back = system.tangent_backward(here)?;
            let prev = system.backward(here)?;
            let mut next_env = DVector::zeros(env_vec.len());
            for r in 0..jac_back.nrows() {
                let mut acc = 0.0;
                for c in 0..jac_back.ncols() {
                    acc += jac_back[(r, c)].abs() * env_vec[c];
                }
                next_env[r] = acc + NOISE_ULPS * eps * prev.coords()[r].abs();
            }
            env_vec = next_env;
            envs.push(env_vec.norm());
            orbit.push(prev);
        }
        points.push(orbit);
        env.push(envs);
    }
    Ok(BackwardTrack { points, env })
}

/// The node pair and depth at which a check came closest to (or past) its
/// bound.
#[derive(Debug, Clone, Copy)]
pub struct PairAt {
    pub node_a: [i32; 2],
    pub node_b: [i32; 2],
    pub depth: u64,
}

/// Outcome of a backward-contraction sweep over all node pairs of a disk.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub pass: bool,
    /// Largest certified ratio `(d_k - u_k) / (sigma1^{-k} d_0)`, clamped
    /// at zero; at most `1 + CONTRACTION_SLACK` on a pass.
    pub max_ratio: f64,
    pub violations: usize,
    pub worst_pair: Option<PairAt>,
    pub depth: u64,
    pub pairs: usize,
    /// Deepest level at which every pair's bound still towered over its
    /// envelope; beyond it a pass is honest but weak.
    pub resolved_depth: u64,
}

/// Check `d(f^{-k} y, f^{-k} z) <= sigma1^{-k} d(y, z)` (with slack and
/// envelope) for every distinct node pair of `disk` and every depth up to
/// `depth`.
pub fn check_backward_contraction(
    system: &dyn SmoothSystem,
    disk: &DiskMesh,
    depth: u64,
    sigma1: f64,
) -> Result<ContractionReport> {
    if !(sigma1 > 1.0) {
        return Err(Error::ThresholdOrder {
            relation: format!("backward contraction rate sigma1 = {sigma1} must exceed 1"),
        });
    }
    let nodes = disk.nodes();
    let starts: Vec<&Point> = nodes.iter().map(|n| &n.position).collect();
    let track = backward_track(system, &starts, depth)?;
    let mut report = ContractionReport {
        pass: true,
        max_ratio: if depth == 0 { 1.0 } else { 0.0 },
        violations: 0,
        worst_pair: None,
        depth,
        pairs: 0,
        resolved_depth: depth,
    };
    let mut unresolved_from: Option<u64> = None;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let d0 = chart_distance(&track.points[i][0], &track.points[j][0])?;
            if d0 == 0.0 {
                continue;
            }
            report.pairs += 1;
            for k in 1..=depth {
                let ku = k as usize;
                let d_k = chart_distance(&track.points[i][ku], &track.points[j][ku])?;
                let u_k = track.env[i][ku] + track.env[j][ku];
                let ideal = sigma1.powi(-(k as i32)) * d0;
                let ratio = ((d_k - u_k) / ideal).max(0.0);
                if ratio > report.max_ratio {
                    report.max_ratio = ratio;
                    report.worst_pair = Some(PairAt {
                        node_a: nodes[i].idx,
                        node_b: nodes[j].idx,
                        depth: k,
                    });
                }
                if d_k > ideal * (1.0 + CONTRACTION_SLACK) + u_k {
                    report.violations += 1;
                    report.pass = false;
                }
                if u_k > RESOLVE_FRACTION * ideal {
                    unresolved_from = Some(unresolved_from.map_or(k, |p| p.min(k)));
                }
            }
        }
    }
    if let Some(k) = unresolved_from {
        report.resolved_depth = k - 1;
    }
    Ok(report)
}

/// Outcome of a tangent-alignment sweep over the nodes of a disk.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentReport {
    pub pass: bool,
    /// Largest Grassmann distance between a node tangent and the graph
    /// frame at the base.
    pub max_deviation: f64,
    pub bound: f64,
    /// Number of forward steps the bound was contracted by.
    pub steps: u64,
}

/// Check that every node tangent of `disk` lies within
/// `max(sigma2^{-steps} * cone_width, ALIGN_FLOOR)` of the graph frame.
pub fn check_tangent_alignment(
    disk: &DiskMesh,
    sigma2: f64,
    cone_width: f64,
    steps: u64,
) -> Result<AlignmentReport> {
    if !(sigma2 > 1.0) {
        return Err(Error::ThresholdOrder {
            relation: format!("alignment rate sigma2 = {sigma2} must exceed 1"),
        });
    }
    let bound = (sigma2.powi(-(steps.min(i32::MAX as u64) as i32)) * cone_width).max(ALIGN_FLOOR);
    let mut max_deviation = 0.0f64;
    for node in disk.nodes() {
        max_deviation = max_deviation.max(grassmann_distance(&node.tangent, disk.frame())?);
    }
    Ok(AlignmentReport {
        pass: max_deviation <= bound,
        max_deviation,
        bound,
        steps,
    })
}

/// The measured distortion constant of a disk, with its resolution record.
#[derive(Debug, Clone, Copy)]
pub struct CertificateMeasurement {
    /// `max(1, max over pairs and depths of (d_k - u_k) chi^k / d_0)`: the
    /// largest certified backward distortion relative to pure `chi^{-k}`
    /// contraction.
    pub t: f64,
    pub depth: u64,
    pub pairs: usize,
    pub resolved_depth: u64,
}

/// Measure the distortion constant of `disk` under backward iteration
/// against the contraction rate `chi`, over every distinct node pair.
pub fn measure_certificate(
    system: &dyn SmoothSystem,
    disk: &DiskMesh,
    chi: f64,
    depth: u64,
) -> Result<CertificateMeasurement> {
    if !(chi > 1.0) {
        return Err(Error::ThresholdOrder {
            relation: format!("certificate rate chi = {chi} must exceed 1"),
        });
    }
    let nodes = disk.nodes();
    let starts: Vec<&Point> = nodes.iter().map(|n| &n.position).collect();
    let track = backward_track(system, &starts, depth)?;
    let mut t = 1.0f64;
    let mut pairs = 0usize;
    let mut unresolved_from: Option<u64> = None;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let d0 = chart_distance(&track.points[i][0], &track.points[j][0])?;
            if d0 == 0.0 {
                continue;
            }
            pairs += 1;
            for k in 1..=depth {
                let ku = k as usize;
                let d_k = chart_distance(&track.points[i][ku], &track.points[j][ku])?;
                let u_k = track.env[i][ku] + track.env[j][ku];
                let scale = chi.powi(-(k as i32)) * d0;
                t = t.max(((d_k - u_k) / scale).max(0.0));
                if u_k > RESOLVE_FRACTION * scale {
                    unresolved_from = Some(unresolved_from.map_or(k, |p| p.min(k)));
                }
            }
        }
    }
    Ok(CertificateMeasurement {
        t,
        depth,
        pairs,
        resolved_depth: unresolved_from.map_or(depth, |k| k - 1),
    })
}

/// Outcome of verifying a manifold certificate to a backward depth.
#[derive(Debug, Clone, Copy)]
pub struct VerificationReport {
    pub pass: bool,
    /// Largest certified ratio `(d_k - u_k) chi^k / (T d_0)`; at most `1`
    /// (plus slack) on a pass, growing geometrically on a genuine failure.
    pub max_ratio: f64,
    pub violations: usize,
    pub depth: u64,
    pub pairs_checked: usize,
    pub resolved_depth: u64,
}

/// Verify the certificate `(chi, T)` of a grown manifold: every node
/// against the center, plus [`VERIFY_PAIRS`] seeded random node pairs, must
/// satisfy `d(f^{-k} y, f^{-k} z) <= T chi^{-k} d(y, z)` for all
/// `1 <= k <= depth` up to envelope uncertainty.  Depth `0` passes
/// vacuously.
pub fn verify_local_manifold(
    system: &dyn SmoothSystem,
    manifold: &LocalManifold,
    depth: u64,
) -> Result<VerificationReport> {
    let mesh = manifold.mesh();
    let nodes = mesh.nodes();
    let chi = manifold.chi();
    let t_cert = manifold.t();
    let center = nodes
        .iter()
        .position(|n| n.idx == [0, 0])
        .ok_or_else(|| Error::MeshParams {
            reason: "mesh has no center node".to_string(),
        })?;
    let mut pair_list: Vec<(usize, usize)> = (0..nodes.len())
        .filter(|&i| i != center)
        .map(|i| (center, i))
        .collect();
    if nodes.len() >= 2 {
        let mut r = rng::stream(42, "manifold-verify", 0);
        while pair_list.len() < nodes.len() - 1 + VERIFY_PAIRS {
            let i = r.random_range(0..nodes.len());
            let j = r.random_range(0..nodes.len());
            if i != j {
                pair_list.push((i, j));
            }
        }
    }
    let starts: Vec<&Point> = nodes.iter().map(|n| &n.position).collect();
    let track = backward_track(system, &starts, depth)?;
    let mut report = VerificationReport {
        pass: true,
        max_ratio: 0.0,
        violations: 0,
        depth,
        pairs_checked: 0,
        resolved_depth: depth,
    };
    let mut unresolved_from: Option<u64> = None;
    for (i, j) in pair_list {
        let d0 = chart_distance(&track.points[i][0], &track.points[j][0])?;
        if d0 == 0.0 {
            continue;
        }
        report.pairs_checked += 1;
        for k in 1..=depth {
            let ku = k as usize;
            let d_k = chart_distance(&track.points[i][ku], &track.points[j][ku])?;
            let u_k = track.env[i][ku] + track.env[j][ku];
            let bound = t_cert * chi.powi(-(k as i32)) * d0;
            report.max_ratio = report.max_ratio.max(((d_k - u_k) / bound).max(0.0));
            if d_k > bound * (1.0 + RATIO_EPS) + u_k {
                report.violations += 1;
                report.pass = false;
            }
            if u_k > RESOLVE_FRACTION * bound {
                unresolved_from = Some(unresolved_from.map_or(k, |p| p.min(k)));
            }
        }
    }
    if let Some(k) = unresolved_from {
        report.resolved_depth = k - 1;
    }
    Ok(report)
}
