//! Piecewise-linear disk meshes represented as graphs over a moving bundle.
//!
//! A disk is stored as a regular sup-norm grid in the chart of its base
//! point: node `(i1, i2)` sits at offset `F u + w(u)` with `u = (i1 h, i2 h)`
//! in the graph-domain frame `F` and `w(u)` orthogonal to it.  Pushing a
//! disk forward maps every node through the dynamics, re-expresses the image
//! cloud as a graph over the frame at the next orbit index, and resamples it
//! on a fresh regular grid so later cuts are pure node selections.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{grassmann_distance, Subspace};
use crate::error::{Error, Result};
use crate::linalg;
use crate::phase::{chart_offset, OrbitSegment, Point, SmoothSystem, Space};

/// Largest per-coordinate chart offset a torus mesh may reach; beyond this
/// the minimal-image chart stops being injective long before the wrap at
/// `0.5`, so pushes refuse it outright.
pub const CHART_BOUND_TORUS: f64 = 0.24;

/// Hard cap on nodes per mesh; a push that would exceed it aborts instead of
/// thrashing memory during an expansion burst.
pub const MESH_NODE_BUDGET: usize = 4_000_000;

/// Relative tolerance when snapping length ratios to integer grid counts.
const GRID_SNAP_TOL: f64 = 1e-9;

/// Barycentric containment slack: a point this far (relative) outside a
/// triangle still counts as inside, absorbing roundoff on shared edges.
const BARY_TOL: f64 = -1e-9;

/// Relative interpolation-parameter slack at the outermost segment of a
/// one-dimensional chain.
const EDGE_CLAMP_TOL: f64 = 1e-6;

/// Which bundle of a splitting the disk is a graph over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphDomain {
    /// Graph over the strongest bundle `E`.
    E,
    /// Graph over the direct sum `E ⊕ F` of a three-bundle splitting.
    EF,
}

impl GraphDomain {
    /// The domain subspace at orbit index `j`.
    pub fn domain_at(
        &self,
        split: &crate::bundle::SplittingField,
        j: i64,
    ) -> Result<Subspace> {
        match self {
            GraphDomain::E => Ok(split.e_at(j)?.clone()),
            GraphDomain::EF => split.e_at(j)?.direct_sum(split.f_at(j)?),
        }
    }
}

/// One mesh node: integer grid index, phase-space position, and the
/// transported tangent plane of the disk at that node.
#[derive(Debug, Clone)]
pub struct MeshNode {
    /// Grid index `(i1, i2)`; one-dimensional disks keep `i2 = 0`.
    pub idx: [i32; 2],
    pub position: Point,
    pub tangent: Subspace,
}

/// A `k`-dimensional embedded disk sampled on a regular grid, stored as a
/// graph over the domain frame at its base orbit index.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    base: Point,
    base_step: i64,
    domain: GraphDomain,
    frame: Subspace,
    k: usize,
    half: i32,
    spacing: f64,
    radius: f64,
    nodes: Vec<MeshNode>,
    interp_residual: f64,
}

impl DiskMesh {
    pub fn base(&self) -> &Point {
        &self.base
    }

    /// Orbit index the base currently sits at (seed disks start at `0`).
    pub fn base_step(&self) -> i64 {
        self.base_step
    }

    pub fn domain(&self) -> GraphDomain {
        self.domain
    }

    /// Orthonormal frame of the graph domain at the base.
    pub fn frame(&self) -> &Subspace {
        &self.frame
    }

    /// Intrinsic dimension of the disk (1 or 2).
    pub fn graph_dim(&self) -> usize {
        self.k
    }

    /// Grid half-width: indices run over `-half ..= half` per axis.
    pub fn half_width(&self) -> i32 {
        self.half
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nominal radius: the requested value for seeded or cut disks, the
    /// covered footprint `half * spacing` for freshly pushed ones.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Largest graph-value interpolation defect observed while resampling
    /// the most recent push; exactly zero for affine dynamics.
    pub fn interp_residual(&self) -> f64 {
        self.interp_residual
    }

    fn node_index(&self, i1: i32, i2: i32) -> usize {
        if self.k == 1 {
            (i1 + self.half) as usize
        } else {
            let side = (2 * self.half + 1) as usize;
            (i2 + self.half) as usize * side + (i1 + self.half) as usize
        }
    }

    /// Node at grid index `(i1, i2)`.
    pub fn node(&self, i1: i32, i2: i32) -> Result<&MeshNode> {
        let ok = i1.abs() <= self.half && ((self.k == 1 && i2 == 0) || i2.abs() <= self.half);
        if !ok {
            return Err(Error::MeshParams {
                reason: format!("node index ({i1}, {i2}) outside half-width {}", self.half),
            });
        }
        Ok(&self.nodes[self.node_index(i1, i2)])
    }

    /// Grid offset of node `(i1, i2)` in the domain frame, in chart units.
    fn grid_u(&self, i1: i32, i2: i32) -> DVector<f64> {
        let mut u = DVector::zeros(self.k);
        u[0] = f64::from(i1) * self.spacing;
        if self.k == 2 {
            u[1] = f64::from(i2) * self.spacing;
        }
        u
    }

    fn grid_indices(half: i32, k: usize) -> Vec<[i32; 2]> {
        let side = 2 * half + 1;
        let mut out = Vec::with_capacity(if k == 1 {
            side as usize
        } else {
            (side as usize).pow(2)
        });
        let i2_range = if k == 1 { 0..=0 } else { -half..=half };
        for i2 in i2_range {
            for i1 in -half..=half {
                out.push([i1, i2]);
            }
        }
        out
    }
}

/// Snap `length / spacing` to an integer count, rejecting non-commensurate
/// pairs so grids of cut disks land exactly on existing nodes.
pub(crate) fn snap_count(length: f64, spacing: f64) -> Result<i32> {
    if !(spacing.is_finite() && spacing > 0.0 && length.is_finite() && length > 0.0) {
        return Err(Error::MeshParams {
            reason: format!("radius {length:.3e} and spacing {spacing:.3e} must be positive"),
        });
    }
    let ratio = length / spacing;
    let snapped = ratio.round();
    if (ratio - snapped).abs() > GRID_SNAP_TOL * ratio.max(1.0) || snapped < 1.0 {
        return Err(Error::MeshParams {
            reason: format!(
                "radius {length:.3e} is not a positive integer multiple of spacing {spacing:.3e}"
            ),
        });
    }
    if snapped > 1e6 {
        return Err(Error::MeshBudget {
            nodes: snapped as usize,
            budget: MESH_NODE_BUDGET,
        });
    }
    Ok(snapped as i32)
}

fn check_budget(half: i32, k: usize) -> Result<()> {
    let side = (2 * half + 1) as usize;
    let nodes = if k == 1 { side } else { side * side };
    if nodes > MESH_NODE_BUDGET {
        return Err(Error::MeshBudget {
            nodes,
            budget: MESH_NODE_BUDGET,
        });
    }
    Ok(())
}

fn check_chart_radius(space: Space, radius: f64) -> Result<()> {
    if matches!(space, Space::Torus(_)) && radius > CHART_BOUND_TORUS {
        return Err(Error::ChartBound {
            radius,
            bound: CHART_BOUND_TORUS,
        });
    }
    Ok(())
}

/// Seed a flat disk of the given radius at orbit index `0`.
///
/// `x0` must be the orbit point the splitting was estimated along at index
/// `0`; every node is placed at `x0 + F u` on the regular grid with tangent
/// equal to the domain frame, so the seed is a flat graph with `w ≡ 0`.
pub fn seed_disk(
    split: &crate::bundle::SplittingField,
    domain: GraphDomain,
    x0: &Point,
    radius: f64,
    spacing: f64,
) -> Result<DiskMesh> {
    let frame = domain.domain_at(split, 0)?;
    let k = frame.dim();
    if k == 0 || k > 2 {
        return Err(Error::DiskDimUnsupported { dim: k });
    }
    if frame.ambient_dim() != x0.dim() {
        return Err(Error::DimensionMismatch {
            expected: x0.dim(),
            got: frame.ambient_dim(),
        });
    }
    check_chart_radius(x0.space(), radius)?;
    let half = snap_count(radius, spacing)?;
    check_budget(half, k)?;
    let mut disk = DiskMesh {
        base: x0.clone(),
        base_step: 0,
        domain,
        frame: frame.clone(),
        k,
        half,
        spacing,
        radius,
        nodes: Vec::new(),
        interp_residual: 0.0,
    };
    let mut nodes = Vec::new();
    for idx in DiskMesh::grid_indices(half, k) {
        let u = disk.grid_u(idx[0], idx[1]);
        let position = x0.displaced(&(frame.frame() * u))?;
        nodes.push(MeshNode {
            idx,
            position,
            tangent: frame.clone(),
        });
    }
    disk.nodes = nodes;
    Ok(disk)
}

/// Orthogonal tilt of a tangent plane over a graph frame: the operator norm
/// of the slope `B A^{-1}` where `A` collects in-frame components and `B`
/// the orthogonal rest.  Infinite when the plane turns vertical.
fn frame_tilt(frame: &Subspace, tangent: &Subspace) -> f64 {
    let f = frame.frame();
    let t = tangent.frame();
    let a = f.transpose() * t;
    let b = t - f * &a;
    let svd = a.clone().svd(false, false);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min.is_finite() && sigma_min > 1e-12) {
        return f64::INFINITY;
    }
    match linalg::invert(&a) {
        Ok(a_inv) => linalg::operator_norm(&(b * a_inv)),
        Err(_) => f64::INFINITY,
    }
}

/// Orthogonal Procrustes rotation `R` minimizing `‖A R - B‖_F`, used to put
/// two orthonormal frames into a common column convention before averaging.
fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.transpose() * b;
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(Error::InvalidFrame {
                reason: "frame alignment SVD failed".to_string(),
            })
        }
    };
    Ok(u * vt)
}

/// Convex blend of orthonormal frames: align each to the first, sum with the
/// given weights, orthonormalize the result.
fn blend_frames(entries: &[(f64, &DMatrix<f64>)]) -> Result<DMatrix<f64>> {
    let first = entries
        .iter()
        .find(|(wt, _)| *wt > 0.0)
        .map(|(_, m)| *m)
        .unwrap_or(entries[0].1);
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for (wt, m) in entries {
        if *wt == 0.0 {
            continue;
        }
        let r = procrustes(m, first)?;
        acc += (*m * r) * *wt;
    }
    linalg::orthonormalize(&acc)
}

/// A cloud of graph samples over a common frame, indexed by the regular
/// grid of the disk it came from, supporting interpolation at arbitrary
/// in-footprint chart coordinates.
struct GraphCloud {
    k: usize,
    half: i32,
    /// In-frame coordinates per source node (length `k`).
    u: Vec<DVector<f64>>,
    /// Orthogonal graph values per source node (ambient dimension).
    w: Vec<DVector<f64>>,
    /// Tangent frames per source node (orthonormal, ambient × k).
    t: Vec<DMatrix<f64>>,
    /// `true` when the one-dimensional chain is descending in `u`.
    descending: bool,
    /// Affine guess `idx ≈ inv * u` for cell location in two dimensions.
    inv_guess: Option<DMatrix<f64>>,
}

impl GraphCloud {
    fn node_index(&self, i1: i32, i2: i32) -> usize {
        if self.k == 1 {
            (i1 + self.half) as usize
        } else {
            let side = (2 * self.half + 1) as usize;
            (i2 + self.half) as usize * side + (i1 + self.half) as usize
        }
    }

    /// Assemble a cloud from per-node chart data produced by a push or a
    /// re-expression, then verify it is a fold-free graph.
    fn build(
        k: usize,
        half: i32,
        u: Vec<DVector<f64>>,
        w: Vec<DVector<f64>>,
        t: Vec<DMatrix<f64>>,
        step: i64,
    ) -> Result<Self> {
        let mut cloud = GraphCloud {
            k,
            half,
            u,
            w,
            t,
            descending: false,
            inv_guess: None,
        };
        if k == 1 {
            let side = 2 * half + 1;
            let mut direction = 0.0f64;
            for i in 0..(side - 1) as usize {
                let d = cloud.u[i + 1][0] - cloud.u[i][0];
                if d == 0.0 || (direction != 0.0 && d.signum() != direction) {
                    return Err(Error::FoldOver {
                        node: vec![i as i32 - half],
                        step,
                    });
                }
                direction = d.signum();
            }
            cloud.descending = direction < 0.0;
        } else {
            for i2 in -half..half {
                for i1 in -half..half {
                    let p00 = &cloud.u[cloud.node_index(i1, i2)];
                    let p10 = &cloud.u[cloud.node_index(i1 + 1, i2)];
                    let p01 = &cloud.u[cloud.node_index(i1, i2 + 1)];
                    let p11 = &cloud.u[cloud.node_index(i1 + 1, i2 + 1)];
                    let a1 = signed_area(p00, p10, p11);
                    let a2 = signed_area(p00, p11, p01);
                    if a1 == 0.0 || a2 == 0.0 || a1.signum() != a2.signum() {
                        return Err(Error::FoldOver {
                            node: vec![i1, i2],
                            step,
                        });
                    }
                }
            }
            // Consistent orientation across all cells.
            let ref_sign = {
                let p00 = &cloud.u[cloud.node_index(0, 0)];
                let p10 = &cloud.u[cloud.node_index(1, 0)];
                let p01 = &cloud.u[cloud.node_index(0, 1)];
                signed_area(p00, p10, p01).signum()
            };
            for i2 in -half..half {
                for i1 in -half..half {
                    let p00 = &cloud.u[cloud.node_index(i1, i2)];
                    let p10 = &cloud.u[cloud.node_index(i1 + 1, i2)];
                    let p11 = &cloud.u[cloud.node_index(i1 + 1, i2 + 1)];
                    if signed_area(p00, p10, p11).signum() != ref_sign {
                        return Err(Error::FoldOver {
                            node: vec![i1, i2],
                            step,
                        });
                    }
                }
            }
            // Affine location guess from central differences.
            let c10 = &cloud.u[cloud.node_index(1, 0)] - &cloud.u[cloud.node_index(-1, 0)];
            let c01 = &cloud.u[cloud.node_index(0, 1)] - &cloud.u[cloud.node_index(0, -1)];
            let mut a = DMatrix::zeros(2, 2);
            a[(0, 0)] = c10[0] / 2.0;
            a[(1, 0)] = c10[1] / 2.0;
            a[(0, 1)] = c01[0] / 2.0;
            a[(1, 1)] = c01[1] / 2.0;
            cloud.inv_guess = linalg::invert(&a).ok();
        }
        Ok(cloud)
    }

    /// Largest centered sup-norm ball around `u = 0` covered by the cloud.
    ///
    /// One-dimensional chains are monotone, so the covered interval is
    /// spanned by the endpoints.  Two-dimensional footprints take the exact
    /// minimum of the sup-norm over every boundary segment of the image of
    /// the source grid boundary; the minimum of a piecewise-linear convex
    /// function on a segment is attained at a kink (`x = 0`, `y = 0`,
    /// `x = ±y`) or an endpoint, so those candidates are enumerated.
    fn footprint(&self) -> f64 {
        if self.k == 1 {
            let lo = self.u[0][0];
            let hi = self.u[self.u.len() - 1][0];
            let (min_u, max_u) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            (-min_u).min(max_u).max(0.0)
        } else {
            let h = self.half;
            let mut boundary: Vec<usize> = Vec::new();
            for i1 in -h..=h {
                boundary.push(self.node_index(i1, -h));
            }
            for i2 in -h + 1..=h {
                boundary.push(self.node_index(h, i2));
            }
            for i1 in (-h..h).rev() {
                boundary.push(self.node_index(i1, h));
            }
            for i2 in (-h..h).rev() {
                boundary.push(self.node_index(-h, i2));
            }
            let mut best = f64::INFINITY;
            for pair in 0..boundary.len() {
                let p = &self.u[boundary[pair]];
                let q = &self.u[boundary[(pair + 1) % boundary.len()]];
                best = best.min(segment_min_sup_norm(p, q));
            }
            best.max(0.0)
        }
    }

    /// Interpolated graph value and tangent frame at chart coordinate
    /// `target`, or `None` when the footprint does not cover it.
    fn eval(&self, target: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        if self.k == 1 {
            self.eval_chain(target[0])
        } else {
            self.eval_sheet(target)
        }
    }

    fn eval_chain(&self, x: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.u.len();
        let val = |i: usize| -> f64 {
            if self.descending {
                self.u[n - 1 - i][0]
            } else {
                self.u[i][0]
            }
        };
        let slot = |i: usize| -> usize {
            if self.descending {
                n - 1 - i
            } else {
                i
            }
        };
        if x < val(0) || x > val(n - 1) {
            let span = val(n - 1) - val(0);
            let slack = EDGE_CLAMP_TOL * span.max(f64::MIN_POSITIVE);
            if x < val(0) - slack || x > val(n - 1) + slack {
                return None;
            }
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if val(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x0 = val(lo);
        let x1 = val(hi);
        let theta = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let ia = slot(lo);
        let ib = slot(hi);
        let w = &self.w[ia] * (1.0 - theta) + &self.w[ib] * theta;
        let t = blend_frames(&[(1.0 - theta, &self.t[ia]), (theta, &self.t[ib])]).ok()?;
        Some((w, t))
    }

    fn eval_sheet(&self, target: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let h = self.half;
        let guess = self.inv_guess.as_ref().map(|inv| {
            let g = inv * target;
            (
                (g[0].round() as i32).clamp(-h, h - 1),
                (g[1].round() as i32).clamp(-h, h - 1),
            )
        });
        if let Some((g1, g2)) = guess {
            for ring in 0..=3 {
                for i2 in (g2 - ring).max(-h)..=(g2 + ring).min(h - 1) {
                    for i1 in (g1 - ring).max(-h)..=(g1 + ring).min(h - 1) {
                        if ring > 0 && (i1 - g1).abs() < ring && (i2 - g2).abs() < ring {
                            continue;
                        }
                        if let Some(hit) = self.eval_cell(i1, i2, target) {
                            return Some(hit);
                        }
                    }
                }
            }
        }
        for i2 in -h..h {
            for i1 in -h..h {
                if let Some(hit) = self.eval_cell(i1, i2, target) {
                    return Some(hit);
                }
            }
        }
        None
    }

    fn eval_cell(&self, i1: i32, i2: i32, target: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n00 = self.node_index(i1, i2);
        let n10 = self.node_index(i1 + 1, i2);
        let n01 = self.node_index(i1, i2 + 1);
        let n11 = self.node_index(i1 + 1, i2 + 1);
        for tri in [[n00, n10, n11], [n00, n11, n01]] {
            if let Some(bary) = barycentric(&self.u[tri[0]], &self.u[tri[1]], &self.u[tri[2]], target) {
                let w = &self.w[tri[0]] * bary[0]
                    + &self.w[tri[1]] * bary[1]
                    + &self.w[tri[2]] * bary[2];
                let t = blend_frames(&[
                    (bary[0].max(0.0), &self.t[tri[0]]),
                    (bary[1].max(0.0), &self.t[tri[1]]),
                    (bary[2].max(0.0), &self.t[tri[2]]),
                ])
                .ok()?;
                return Some((w, t));
            }
        }
        None
    }
}

fn signed_area(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Barycentric coordinates of `p` in triangle `abc`, accepted with a small
/// negative slack so points on shared edges belong to some triangle.
fn barycentric(
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    p: &DVector<f64>,
) -> Option<[f64; 3]> {
    let area = signed_area(a, b, c);
    if area == 0.0 {
        return None;
    }
    let la = signed_area(p, b, c) / area;
    let lb = signed_area(a, p, c) / area;
    let lc = signed_area(a, b, p) / area;
    if la >= BARY_TOL && lb >= BARY_TOL && lc >= BARY_TOL {
        Some([la, lb, lc])
    } else {
        None
    }
}

/// Exact minimum of `max(|x|, |y|)` over the segment from `p` to `q`.
fn segment_min_sup_norm(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let eval = |t: f64| -> f64 {
        let x = p[0] + t * (q[0] - p[0]);
        let y = p[1] + t * (q[1] - p[1]);
        x.abs().max(y.abs())
    };
    let mut candidates = vec![0.0, 1.0];
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    // Kinks of |x(t)|, |y(t)|, and crossings of |x| = |y|.
    if dx != 0.0 {
        candidates.push(-p[0] / dx);
    }
    if dy != 0.0 {
        candidates.push(-p[1] / dy);
    }
    let d_diff = dx - dy;
    if d_diff != 0.0 {
        candidates.push(-(p[0] - p[1]) / d_diff);
    }
    let d_sum = dx + dy;
    if d_sum != 0.0 {
        candidates.push(-(p[0] + p[1]) / d_sum);
    }
    candidates
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .map(eval)
        .fold(f64::INFINITY, f64::min)
}

/// Per-node image data produced by mapping a disk one step forward.
struct MappedNode {
    u: DVector<f64>,
    w: DVector<f64>,
    tangent: Subspace,
}

/// Push a disk one step forward and resample it as a regular-grid graph
/// over the domain frame at the next orbit index.
///
/// Every node is mapped through the dynamics with its tangent plane; the
/// image cloud is re-expressed in the chart of the new base, checked for
/// fold-over and for the cone condition (orthogonal tilt over the new frame
/// at most `cone_width`), and the largest centered ball it covers becomes
/// the new footprint.  The resampling defect on the image samples is
/// recorded as the interpolation residual.
pub fn push_disk(
    system: &dyn SmoothSystem,
    split: &crate::bundle::SplittingField,
    disk: &DiskMesh,
    cone_width: f64,
) -> Result<DiskMesh> {
    let new_step = disk.base_step + 1;
    let new_base = system.forward(&disk.base)?;
    let frame_new = disk.domain.domain_at(split, new_step)?;
    let f_mat = frame_new.frame();
    let k = disk.k;
    let h = disk.spacing;

    let mut mapped = Vec::with_capacity(disk.nodes.len());
    for node in &disk.nodes {
        let image = system.forward(&node.position)?;
        let jac = system.tangent(&node.position)?;
        let pushed = jac * node.tangent.frame();
        let tangent = Subspace::span(&pushed)?;
        let tilt = frame_tilt(&frame_new, &tangent);
        if !(tilt <= cone_width) {
            return Err(Error::ConeViolation {
                node: node.idx[..k].to_vec(),
                tilt,
                width: cone_width,
                step: new_step,
            });
        }
        let delta = chart_offset(&new_base, &image)?;
        if matches!(new_base.space(), Space::Torus(_)) {
            let inf = delta.amax();
            if inf > CHART_BOUND_TORUS {
                return Err(Error::ChartBound {
                    radius: inf,
                    bound: CHART_BOUND_TORUS,
                });
            }
        }
        let u = f_mat.transpose() * &delta;
        let w = &delta - f_mat * &u;
        mapped.push(MappedNode { u, w, tangent });
    }

    let cloud = GraphCloud::build(
        k,
        disk.half,
        mapped.iter().map(|m| m.u.clone()).collect(),
        mapped.iter().map(|m| m.w.clone()).collect(),
        mapped.iter().map(|m| m.tangent.frame().clone()).collect(),
        new_step,
    )?;

    // A run of contracting steps can squeeze the footprint below the grid
    // resolution without the disk degenerating; refine the spacing by exact
    // halving until at least four cells fit, so the disk survives the
    // bottleneck and later cuts still land on aligned grids.
    let footprint = cloud.footprint();
    let mut h_new = h;
    while footprint / h_new < 4.0 {
        if !(footprint > 0.0) || h_new < h * 2f64.powi(-40) {
            return Err(Error::MeshParams {
                reason: format!("pushed footprint collapsed at step {new_step}"),
            });
        }
        h_new /= 2.0;
    }
    let mut new_half = ((footprint / h_new) + GRID_SNAP_TOL).floor() as i32;
    loop {
        if new_half < 1 {
            return Err(Error::MeshParams {
                reason: format!("pushed footprint collapsed below one cell at step {new_step}"),
            });
        }
        check_budget(new_half, k)?;
        // Graph coordinates are measured along the frame, so the chart
        // excursion per coordinate is the grid radius scaled by the frame's
        // largest row sum (its infinity operator norm); each node is also
        // checked exactly below.
        let chart_scale = (0..f_mat.nrows())
            .map(|i| f_mat.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        check_chart_radius(new_base.space(), chart_scale * f64::from(new_half) * h_new)?;
        let mut new_disk = DiskMesh {
            base: new_base.clone(),
            base_step: new_step,
            domain: disk.domain,
            frame: frame_new.clone(),
            k,
            half: new_half,
            spacing: h_new,
            radius: f64::from(new_half) * h_new,
            nodes: Vec::new(),
            interp_residual: 0.0,
        };
        let mut nodes = Vec::with_capacity(if k == 1 {
            (2 * new_half + 1) as usize
        } else {
            ((2 * new_half + 1) as usize).pow(2)
        });
        let mut covered = true;
        'fill: for idx in DiskMesh::grid_indices(new_half, k) {
            let u_t = new_disk.grid_u(idx[0], idx[1]);
            let Some((w, t)) = cloud.eval(&u_t) else {
                covered = false;
                break 'fill;
            };
            let delta_t = f_mat * &u_t + &w;
            if matches!(new_base.space(), Space::Torus(_)) && delta_t.amax() > CHART_BOUND_TORUS {
                return Err(Error::ChartBound {
                    radius: delta_t.amax(),
                    bound: CHART_BOUND_TORUS,
                });
            }
            let position = new_base.displaced(&delta_t)?;
            nodes.push(MeshNode {
                idx,
                position,
                tangent: Subspace::span(&t)?,
            });
        }
        if !covered {
            new_half -= 1;
            continue;
        }
        new_disk.nodes = nodes;

        // Resampling defect: evaluate the fresh grid back at the mapped
        // source samples that fall inside the new footprint.
        let recheck = GraphCloud::build(
            k,
            new_half,
            new_disk
                .nodes
                .iter()
                .map(|n| new_disk.grid_u(n.idx[0], n.idx[1]))
                .collect(),
            new_disk.nodes.iter().map(|n| {
                let delta = chart_offset(&new_base, &n.position).expect("same space");
                let u = f_mat.transpose() * &delta;
                &delta - f_mat * u
            }).collect(),
            new_disk.nodes.iter().map(|n| n.tangent.frame().clone()).collect(),
            new_step,
        )?;
        let limit = f64::from(new_half) * h_new * (1.0 - 1e-12);
        let mut residual = 0.0f64;
        for m in &mapped {
            if m.u.amax() > limit {
                continue;
            }
            if let Some((w, _)) = recheck.eval(&m.u) {
                residual = residual.max((&w - &m.w).norm());
            }
        }
        new_disk.interp_residual = residual;
        return Ok(new_disk);
    }
}

/// Cut the sub-disk of radius `r` centered at `center` out of `disk`.
///
/// When the center coincides with the disk base (the growth loop always
/// cuts around the current orbit point) the cut is a pure node selection
/// and is bitwise exact; otherwise the disk is re-sampled on a grid
/// centered at the graph point over the center's chart coordinate.
pub fn cut_ball(disk: &DiskMesh, center: &Point, r: f64) -> Result<DiskMesh> {
    let half_r = snap_count(r, disk.spacing)?;
    let delta = chart_offset(&disk.base, center)?;
    let f_mat = disk.frame.frame();
    let u_c = f_mat.transpose() * &delta;
    if u_c.amax() <= 1e-12 {
        if half_r > disk.half {
            return Err(Error::CutTooSmall {
                have: disk.radius,
                need: r,
            });
        }
        let k = disk.k;
        let mut nodes = Vec::new();
        for idx in DiskMesh::grid_indices(half_r, k) {
            nodes.push(disk.node(idx[0], idx[1])?.clone());
        }
        return Ok(DiskMesh {
            base: disk.base.clone(),
            base_step: disk.base_step,
            domain: disk.domain,
            frame: disk.frame.clone(),
            k: disk.k,
            half: half_r,
            spacing: disk.spacing,
            radius: r,
            nodes,
            interp_residual: disk.interp_residual,
        });
    }

    // Off-center cut: re-sample around the graph point over `u_c`.
    let cloud = disk_cloud(disk, &disk.frame, &disk.base)?;
    let room = cloud.footprint() - u_c.amax();
    if f64::from(half_r) * disk.spacing > room + GRID_SNAP_TOL * disk.spacing {
        return Err(Error::CutTooSmall {
            have: room.max(0.0),
            need: r,
        });
    }
    let (w_c, _) = cloud.eval(&u_c).ok_or(Error::CutTooSmall {
        have: room.max(0.0),
        need: r,
    })?;
    let new_base = disk.base.displaced(&(f_mat * &u_c + &w_c))?;
    let mut out = DiskMesh {
        base: new_base.clone(),
        base_step: disk.base_step,
        domain: disk.domain,
        frame: disk.frame.clone(),
        k: disk.k,
        half: half_r,
        spacing: disk.spacing,
        radius: r,
        nodes: Vec::new(),
        interp_residual: disk.interp_residual,
    };
    let mut nodes = Vec::new();
    for idx in DiskMesh::grid_indices(half_r, disk.k) {
        let mut u_t = out.grid_u(idx[0], idx[1]);
        u_t += &u_c;
        let (w, t) = cloud.eval(&u_t).ok_or(Error::CutTooSmall {
            have: room.max(0.0),
            need: r,
        })?;
        let offset = f_mat * &u_t + &w - (f_mat * &u_c + &w_c);
        nodes.push(MeshNode {
            idx,
            position: new_base.displaced(&offset)?,
            tangent: Subspace::span(&t)?,
        });
    }
    out.nodes = nodes;
    Ok(out)
}

/// Express every node of `disk` as a graph sample over `frame` in the chart
/// of `base`.
fn disk_cloud(disk: &DiskMesh, frame: &Subspace, base: &Point) -> Result<GraphCloud> {
    let f_mat = frame.frame();
    let mut us = Vec::with_capacity(disk.nodes.len());
    let mut ws = Vec::with_capacity(disk.nodes.len());
    let mut ts = Vec::with_capacity(disk.nodes.len());
    for node in &disk.nodes {
        let delta = chart_offset(base, &node.position)?;
        let u = f_mat.transpose() * &delta;
        ws.push(&delta - f_mat * &u);
        us.push(u);
        ts.push(node.tangent.frame().clone());
    }
    GraphCloud::build(disk.k, disk.half, us, ws, ts, disk.base_step)
}

/// Sup-norm Cauchy gaps between two successive cut disks of the same
/// nominal radius and spacing: `c0` is the largest graph-value distance and
/// `c1` the largest tangent-plane distance, after re-expressing the earlier
/// disk over the later disk's frame in each disk's own chart so only shape
/// is compared.
pub(crate) fn cauchy_gaps(prev: &DiskMesh, cur: &DiskMesh) -> Result<(f64, f64)> {
    if prev.k != cur.k || prev.radius != cur.radius || prev.domain != cur.domain {
        return Err(Error::MeshParams {
            reason: "gap evaluation needs two cuts of the same nominal radius".to_string(),
        });
    }
    let prev_cloud = disk_cloud(prev, &cur.frame, &prev.base)?;
    let f_mat = cur.frame.frame();
    let mut c0 = 0.0f64;
    let mut c1 = 0.0f64;
    let mut compared = 0usize;
    for node in &cur.nodes {
        let u_t = cur.grid_u(node.idx[0], node.idx[1]);
        let Some((w_prev, t_prev)) = prev_cloud.eval(&u_t) else {
            continue;
        };
        let delta = chart_offset(&cur.base, &node.position)?;
        let u = f_mat.transpose() * &delta;
        let w_cur = &delta - f_mat * u;
        c0 = c0.max((&w_cur - &w_prev).norm());
        let t_prev_sub = Subspace::span(&t_prev)?;
        c1 = c1.max(grassmann_distance(&node.tangent, &t_prev_sub)?);
        compared += 1;
    }
    if compared == 0 {
        return Err(Error::MeshParams {
            reason: "gap evaluation found no comparable nodes".to_string(),
        });
    }
    Ok((c0, c1))
}

/// Graph deviation of the nodes of `inner` from the graph of `outer`,
/// measured over `outer`'s frame in `outer`'s chart: for each inner node the
/// distance between its orthogonal part and the outer graph value at the
/// same in-frame coordinate.  Returns the maximum deviation together with
/// the number of compared and skipped (outside-footprint) nodes.
pub fn graph_deviation(outer: &DiskMesh, inner: &DiskMesh) -> Result<(f64, usize, usize)> {
    let cloud = disk_cloud(outer, &outer.frame, &outer.base)?;
    let f_mat = outer.frame.frame();
    let mut max_dev = 0.0f64;
    let mut compared = 0usize;
    let mut outside = 0usize;
    for node in &inner.nodes {
        let delta = chart_offset(&outer.base, &node.position)?;
        let u = f_mat.transpose() * &delta;
        let w = &delta - f_mat * &u;
        match cloud.eval(&u) {
            Some((w_outer, _)) => {
                max_dev = max_dev.max((&w - &w_outer).norm());
                compared += 1;
            }
            None => outside += 1,
        }
    }
    if compared == 0 {
        return Err(Error::MeshParams {
            reason: "inclusion check found no comparable nodes".to_string(),
        });
    }
    Ok((max_dev, compared, outside))
}

/// Coarsen a disk whose spacing was refined during a contraction bottleneck
/// back to `spacing`, by pure node selection on the aligned sub-grid.
///
/// Requires `spacing` to be an integer multiple of the disk's current
/// spacing that divides its half-width, which holds by construction for
/// cuts of nominal radius commensurate with the original grid.
pub fn coarsen_to(disk: &DiskMesh, spacing: f64) -> Result<DiskMesh> {
    let stride = snap_count(spacing, disk.spacing)?;
    if stride == 1 {
        return Ok(DiskMesh {
            base: disk.base.clone(),
            base_step: disk.base_step,
            domain: disk.domain,
            frame: disk.frame.clone(),
            k: disk.k,
            half: disk.half,
            spacing: disk.spacing,
            radius: disk.radius,
            nodes: disk.nodes.clone(),
            interp_residual: disk.interp_residual,
        });
    }
    if disk.half % stride != 0 {
        return Err(Error::MeshParams {
            reason: format!(
                "half-width {} not divisible by coarsening stride {stride}",
                disk.half
            ),
        });
    }
    let new_half = disk.half / stride;
    let mut nodes = Vec::new();
    for idx in DiskMesh::grid_indices(new_half, disk.k) {
        let src = disk.node(idx[0] * stride, idx[1] * stride)?;
        nodes.push(MeshNode {
            idx,
            position: src.position.clone(),
            tangent: src.tangent.clone(),
        });
    }
    Ok(DiskMesh {
        base: disk.base.clone(),
        base_step: disk.base_step,
        domain: disk.domain,
        frame: disk.frame.clone(),
        k: disk.k,
        half: new_half,
        spacing: disk.spacing * f64::from(stride),
        radius: disk.radius,
        nodes,
        interp_residual: disk.interp_residual,
    })
}

/// Seed a disk for tests and callers that already have an orbit: checks the
/// base point actually is orbit index `0`.
pub fn seed_disk_on_orbit(
    orbit: &OrbitSegment,
    split: &crate::bundle::SplittingField,
    domain: GraphDomain,
    radius: f64,
    spacing: f64,
) -> Result<DiskMesh> {
    seed_disk(split, domain, orbit.point(0)?, radius, spacing)
}
