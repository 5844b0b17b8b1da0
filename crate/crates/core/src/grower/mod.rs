//! Construction of certified local unstable disks along orbits with
//! nonuniform expansion.
//!
//! The grower seeds a flat disk tangent to the expanding bundle at the
//! orbit's start, pushes it forward one step at a time, and at every
//! hyperbolic time cuts a fixed-radius ball around the current orbit point.
//! Successive cut disks are compared in `C^0` and `C^1`; once the gaps stay
//! below tolerance for three consecutive hyperbolic times, the last cut is
//! returned together with a backward-contraction certificate `(chi, T)`
//! measured on it, where `T` is the largest observed ratio
//! `d(f^{-n} y, f^{-n} z) * chi^n / d(y, z)` over node pairs.  The measured
//! constant is the deliverable; the closed-form prefactor comparator (the
//! smallest domain expansion seen along the window) is recorded alongside.

pub mod checks;
pub mod mesh;

use serde::{Deserialize, Serialize};

use crate::bundle::{lyapunov_estimates, mini_norm, SplittingField};
use crate::error::{Error, Result};
use crate::phase::{OrbitSegment, Point, SmoothSystem};
use crate::times::{hd_times, step_logs, SeqKind, TimeSet};

pub use checks::{
    check_backward_contraction, check_tangent_alignment, measure_certificate,
    verify_local_manifold, AlignmentReport, CertificateMeasurement, ContractionReport,
    VerificationReport, F2_DEPTH_CAP,
};
pub use mesh::{
    coarsen_to, cut_ball, graph_deviation, push_disk, seed_disk, seed_disk_on_orbit, DiskMesh,
    GraphDomain, MeshNode, CHART_BOUND_TORUS, MESH_NODE_BUDGET,
};

/// Number of consecutive below-tolerance gap evaluations that count as
/// convergence.
pub const CONVERGED_CUTS: u32 = 3;

/// Minimum backward depth of the certificate measured on the final disk.
pub const CERT_MIN_DEPTH: u64 = 30;

/// Smallest value calibration may halve a parameter to.
pub const CALIBRATION_FLOOR: f64 = 1e-4;

/// Hyperbolic times the calibration probe window spans.
pub const PROBE_TIMES: usize = 5;

/// Footprint cap between cuts, as a multiple of the cut radius.  A disk
/// capped at `r` at any time still covers radius `r` at the next hyperbolic
/// time, because the trailing-window expansion property applies from the
/// capping step onward; capping at `r` keeps node counts bounded across
/// long gaps between hyperbolic times and keeps one-step images within the
/// torus chart for any radius the chart itself admits.
const FOOTPRINT_CAP_FACTOR: f64 = 1.0;

/// Parameters for growing a local unstable disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowerParams {
    /// Backward contraction rate checked at hyperbolic times (`> 1`).
    pub sigma1: f64,
    /// Tangent alignment rate checked at hyperbolic times (`> 1`).
    pub sigma2: f64,
    /// Cone half-width around the graph domain.
    pub a: f64,
    /// Cut radius.
    pub r: f64,
    /// Grid spacing; `r` must be an integer multiple.
    pub h: f64,
    /// Contraction rate of the certificate measured on the final disk.
    pub chi: f64,
    /// Largest admissible measured distortion constant.
    pub t_cap: f64,
    /// Step budget.
    pub n_max: u64,
    /// Gap tolerance for both the `C^0` and `C^1` Cauchy gaps.
    pub tol_c1: f64,
    /// Keep pushing and checking to the last hyperbolic time even after
    /// convergence, so every usable time is exercised.
    #[serde(default)]
    pub patrol: bool,
}

impl GrowerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("a", self.a),
            ("r", self.r),
            ("h", self.h),
            ("chi", self.chi),
            ("t_cap", self.t_cap),
            ("tol_c1", self.tol_c1),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("grower parameter {name}"),
                    value: v,
                });
            }
        }
        if !(self.sigma1 > 1.0 && self.sigma2 > 1.0 && self.chi > 1.0) {
            return Err(Error::ThresholdOrder {
                relation: format!(
                    "rates must exceed 1: sigma1 = {}, sigma2 = {}, chi = {}",
                    self.sigma1, self.sigma2, self.chi
                ),
            });
        }
        if !(self.t_cap >= 1.0) {
            return Err(Error::ThresholdOrder {
                relation: format!("distortion cap t_cap = {} must be at least 1", self.t_cap),
            });
        }
        if !(self.a > 0.0) {
            return Err(Error::MeshParams {
                reason: format!("cone width a = {} must be positive", self.a),
            });
        }
        if !(self.h > 0.0 && self.h <= self.r) {
            return Err(Error::MeshParams {
                reason: format!("need 0 < h <= r, got h = {}, r = {}", self.h, self.r),
            });
        }
        if !(self.tol_c1 > 0.0) {
            return Err(Error::InvalidSpec {
                reason: format!("gap tolerance tol_c1 = {} must be positive", self.tol_c1),
            });
        }
        if self.n_max < 1 {
            return Err(Error::InvalidSpec {
                reason: "step budget n_max must be at least 1".to_string(),
            });
        }
        mesh::snap_count(self.r, self.h)?;
        Ok(())
    }
}

/// Gap record between two consecutive cut disks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapRecord {
    /// Hyperbolic time of the later cut.
    pub time: u64,
    /// Sup graph-value distance.
    pub c0: f64,
    /// Sup tangent-plane distance.
    pub c1: f64,
}

/// A grown local manifold: the final cut disk plus its certificate and the
/// evidence gathered along the way.
#[derive(Debug, Clone)]
pub struct LocalManifold {
    mesh: DiskMesh,
    chi: f64,
    t: f64,
    r: f64,
    convergence_log: Vec<GapRecord>,
    hyperbolic_times_used: TimeSet,
    min_e_expansion: f64,
    t_depth: u64,
    t_resolved_depth: u64,
}

impl LocalManifold {
    pub fn mesh(&self) -> &DiskMesh {
        &self.mesh
    }

    /// Certificate contraction rate.
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Measured distortion constant.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn convergence_log(&self) -> &[GapRecord] {
        &self.convergence_log
    }

    pub fn hyperbolic_times_used(&self) -> &TimeSet {
        &self.hyperbolic_times_used
    }

    /// Hyperbolic time of the final cut.
    pub fn final_time(&self) -> u64 {
        self.hyperbolic_times_used.last().unwrap_or(0)
    }

    /// Smallest one-step domain expansion seen along the growth window: the
    /// closed-form prefactor comparator for the measured constant.
    pub fn min_e_expansion(&self) -> f64 {
        self.min_e_expansion
    }

    /// Backward depth the certificate was measured to.
    pub fn t_depth(&self) -> u64 {
        self.t_depth
    }

    /// Depth to which the certificate measurement stayed above the rounding
    /// envelope.
    pub fn t_resolved_depth(&self) -> u64 {
        self.t_resolved_depth
    }

    /// The same disk claimed under a different certificate, for probing how
    /// verification judges alternative `(chi, T)` pairs.
    pub fn with_certificate(&self, chi: f64, t: f64) -> LocalManifold {
        LocalManifold {
            chi,
            t,
            ..self.clone()
        }
    }
}

/// Grow a local unstable disk over the strongest bundle `E`.
pub fn grow_unstable(
    system: &dyn SmoothSystem,
    split: &SplittingField,
    x0: &Point,
    params: &GrowerParams,
    hd: &TimeSet,
) -> Result<LocalManifold> {
    grow_core(system, split, GraphDomain::E, x0, params, hd, None)
}

/// Grow a local unstable disk over a chosen graph domain.
pub fn grow_unstable_over(
    system: &dyn SmoothSystem,
    split: &SplittingField,
    domain: GraphDomain,
    x0: &Point,
    params: &GrowerParams,
    hd: &TimeSet,
) -> Result<LocalManifold> {
    grow_core(system, split, domain, x0, params, hd, None)
}

fn grow_core(
    system: &dyn SmoothSystem,
    split: &SplittingField,
    domain: GraphDomain,
    x0: &Point,
    params: &GrowerParams,
    hd: &TimeSet,
    stop_at: Option<u64>,
) -> Result<LocalManifold> {
    params.validate()?;
    if hd.is_empty() {
        return Err(Error::NoHyperbolicTimes {
            horizon: hd.horizon(),
        });
    }
    let last_hd = hd.last().expect("non-empty");
    if let Some(t) = stop_at {
        if !hd.contains(t) {
            return Err(Error::InvalidSpec {
                reason: format!("synchronized stop time {t} is not an available hyperbolic time"),
            });
        }
    }
    let horizon = params.n_max.min(stop_at.unwrap_or(last_hd));
    let cap_radius = FOOTPRINT_CAP_FACTOR * params.r;

    let mut disk = mesh::seed_disk(split, domain, x0, params.r, params.h)?;
    let mut prev_cut: Option<DiskMesh> = None;
    let mut gaps: Vec<GapRecord> = Vec::new();
    let mut used: Vec<u64> = Vec::new();
    let mut consecutive = 0u32;
    let mut converged_at: Option<u64> = None;
    let mut min_e_expansion = f64::INFINITY;
    let mut last_time = 0u64;

    for s in 1..=horizon {
        let dom_prev = domain.domain_at(split, s as i64 - 1)?;
        let jac = system.tangent(disk.base())?;
        min_e_expansion = min_e_expansion.min(mini_norm(&jac, &dom_prev)?);
        disk = mesh::push_disk(system, split, &disk, params.a)?;
        let cap_cells = mesh::snap_count(cap_radius, disk.spacing())?;
        if disk.half_width() > cap_cells {
            disk = mesh::cut_ball(&disk, disk.base(), cap_radius)?;
        }
        if hd.contains(s) {
            used.push(s);
            last_time = s;
            let cut_fine = mesh::cut_ball(&disk, disk.base(), params.r)?;
            let cut = mesh::coarsen_to(&cut_fine, params.h)?;
            let contraction = checks::check_backward_contraction(
                system,
                &cut,
                s.min(checks::F2_DEPTH_CAP),
                params.sigma1,
            )?;
            if !contraction.pass {
                let worst = contraction.worst_pair.map_or(1, |p| p.depth);
                return Err(Error::ContractionViolation {
                    depth: worst,
                    ratio: contraction.max_ratio,
                    bound: 1.0 + checks::CONTRACTION_SLACK,
                });
            }
            let alignment = checks::check_tangent_alignment(&cut, params.sigma2, params.a, s)?;
            if !alignment.pass {
                return Err(Error::AlignmentViolation {
                    step: s as i64,
                    deviation: alignment.max_deviation,
                    bound: alignment.bound,
                });
            }
            if let Some(prev) = &prev_cut {
                let (c0, c1) = mesh::cauchy_gaps(prev, &cut)?;
                gaps.push(GapRecord { time: s, c0, c1 });
                if c0 < params.tol_c1 && c1 < params.tol_c1 {
                    consecutive += 1;
                } else {
                    consecutive = 0;
                }
                if consecutive >= CONVERGED_CUTS && converged_at.is_none() {
                    converged_at = Some(s);
                }
            }
            prev_cut = Some(cut);
            let stop_now = match stop_at {
                Some(t) => s == t,
                None => converged_at.is_some() && !params.patrol,
            };
            if stop_now {
                break;
            }
        }
    }

    if converged_at.is_none() {
        let (c0, c1) = gaps
            .last()
            .map_or((f64::INFINITY, f64::INFINITY), |g| (g.c0, g.c1));
        return Err(Error::GrowthNotConverged {
            steps: horizon,
            c0,
            c1,
        });
    }
    let cut = prev_cut.expect("convergence implies cuts");
    let cert_depth = CERT_MIN_DEPTH.max(last_time.min(checks::F2_DEPTH_CAP));
    let cert = checks::measure_certificate(system, &cut, params.chi, cert_depth)?;
    if cert.t > params.t_cap {
        return Err(Error::CertificateFailure {
            t: cert.t,
            cap: params.t_cap,
        });
    }
    let times = TimeSet::from_times(used, last_time, hd.params().clone())?;
    Ok(LocalManifold {
        mesh: cut,
        chi: params.chi,
        t: cert.t,
        r: params.r,
        convergence_log: gaps,
        hyperbolic_times_used: times,
        min_e_expansion,
        t_depth: cert_depth,
        t_resolved_depth: cert.resolved_depth,
    })
}

/// How far the inner disk of a nested pair deviates from the graph of the
/// outer one.
#[derive(Debug, Clone, Copy)]
pub struct InclusionReport {
    pub max_deviation: f64,
    pub nodes_compared: usize,
    pub nodes_outside: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Result of a nested growth: the wider `E ⊕ F` disk, the `E` disk inside
/// it, and the inclusion evidence.
#[derive(Debug, Clone)]
pub struct NestedGrowth {
    pub ef: LocalManifold,
    pub e: LocalManifold,
    pub inclusion: InclusionReport,
}

/// Grow nested local unstable disks `W^E ⊂ W^{E ⊕ F}` along one orbit.
///
/// Requires a three-bundle splitting whose finite-window exponents satisfy
/// `chi_E^- > chi_F^+ >= chi_F^- > chi_G^+` with `chi_F^- > 0`.  Hyperbolic
/// times are selected separately for the `(E, F)` pair and for the
/// coarsened `(E ⊕ F, G)` pair at thresholds placed a quarter-margin inside
/// the estimated exponent gaps, and both disks are grown over the shared
/// intersection, synchronized to stop at the same hyperbolic time so the
/// final disks share a base point.
pub fn grow_nested(
    system: &dyn SmoothSystem,
    orbit: &OrbitSegment,
    split: &SplittingField,
    params: &GrowerParams,
) -> Result<NestedGrowth> {
    params.validate()?;
    let dims = split.dims();
    if !split.has_g() {
        return Err(Error::BundleDims {
            dims: vec![dims.e, dims.f],
            ambient: orbit.dim(),
        });
    }
    let (_, split_hi) = split.range();
    let window = orbit.n_forward().min(split_hi).max(0) as usize;
    if window == 0 {
        return Err(Error::EmptySequence);
    }
    let est = lyapunov_estimates(orbit, split, window)?;
    let chi_g_plus = est.chi_g_plus.expect("three-bundle estimate");
    if !(est.chi_e_minus > est.chi_f_plus && est.chi_f_minus > chi_g_plus && est.chi_f_minus > 0.0)
    {
        return Err(Error::ExponentOrder {
            relation: format!(
                "need chi_E^- > chi_F^+ >= chi_F^- > chi_G^+ with chi_F^- > 0; estimated \
                 chi_E^- = {:.4}, chi_F^+ = {:.4}, chi_F^- = {:.4}, chi_G^+ = {:.4}",
                est.chi_e_minus, est.chi_f_plus, est.chi_f_minus, chi_g_plus
            ),
        });
    }
    let margin = 0.25
        * est
            .chi_f_minus
            .min(est.chi_e_minus - est.chi_f_plus)
            .min(est.chi_f_minus - chi_g_plus);
    let alpha1 = est.chi_e_minus - margin;
    let alpha2 = est.chi_f_plus + margin;
    let beta1 = est.chi_f_minus - margin;
    let beta2 = chi_g_plus + margin;

    let seq_e = step_logs(orbit, split, SeqKind::LogMiniE, 1)?;
    let seq_ratio = step_logs(orbit, split, SeqKind::LogRatio, 1)?;
    let hd_fine = hd_times(&seq_e, &seq_ratio, alpha1, alpha1 - alpha2)?;
    let coarse = split.coarsen_top()?;
    let seq_e_coarse = step_logs(orbit, &coarse, SeqKind::LogMiniE, 1)?;
    let seq_ratio_coarse = step_logs(orbit, &coarse, SeqKind::LogRatio, 1)?;
    let hd_coarse = hd_times(&seq_e_coarse, &seq_ratio_coarse, beta1, beta1 - beta2)?;
    let shared = hd_fine.intersect(&hd_coarse);
    if shared.is_empty() {
        return Err(Error::NoHyperbolicTimes {
            horizon: shared.horizon(),
        });
    }

    let x0 = orbit.point(0)?;
    let ef_probe = grow_core(system, split, GraphDomain::EF, x0, params, &shared, None)?;
    let e_probe = grow_core(system, split, GraphDomain::E, x0, params, &shared, None)?;
    let (ef, e) = if ef_probe.final_time() == e_probe.final_time() {
        (ef_probe, e_probe)
    } else {
        let sync = Some(ef_probe.final_time().max(e_probe.final_time()));
        (
            grow_core(system, split, GraphDomain::EF, x0, params, &shared, sync)?,
            grow_core(system, split, GraphDomain::E, x0, params, &shared, sync)?,
        )
    };
    let (max_deviation, nodes_compared, nodes_outside) = mesh::graph_deviation(ef.mesh(), e.mesh())?;
    let inclusion = InclusionReport {
        max_deviation,
        nodes_compared,
        nodes_outside,
        tol: params.tol_c1,
        pass: max_deviation <= params.tol_c1,
    };
    Ok(NestedGrowth { ef, e, inclusion })
}

/// Calibrate the cone width and cut radius for a growth, starting from
/// `(a, r) = (0.5, 0.1)` and halving whichever parameter witnesses a
/// failure on a probe window of the first [`PROBE_TIMES`] hyperbolic times:
/// the radius on cut, chart, fold, budget, cone, or backward-contraction
/// failures, the cone width on tangent-alignment failures.  Stops with
/// [`Error::CalibrationFloor`] when a parameter would drop below
/// [`CALIBRATION_FLOOR`].
pub fn calibrate_a_r(
    system: &dyn SmoothSystem,
    split: &SplittingField,
    x0: &Point,
    sigma1: f64,
    sigma2: f64,
    log_lambda1: f64,
    hd: &TimeSet,
) -> Result<(f64, f64)> {
    if !(sigma1 > 1.0 && sigma2 > 1.0) {
        return Err(Error::ThresholdOrder {
            relation: format!("rates sigma1 = {sigma1}, sigma2 = {sigma2} must exceed 1"),
        });
    }
    if !(sigma1.ln() < log_lambda1) {
        return Err(Error::ThresholdOrder {
            relation: format!(
                "ln sigma1 = {:.4} must stay below the hyperbolic-time rate {:.4}",
                sigma1.ln(),
                log_lambda1
            ),
        });
    }
    if hd.is_empty() {
        return Err(Error::NoHyperbolicTimes {
            horizon: hd.horizon(),
        });
    }
    let probe_times: Vec<u64> = hd.times().iter().copied().take(PROBE_TIMES).collect();
    let probe_last = *probe_times.last().expect("non-empty");
    let probe = TimeSet::from_times(probe_times, probe_last, hd.params().clone())?;
    let mut a = 0.5f64;
    let mut r = 0.1f64;
    loop {
        match probe_growth(system, split, x0, a, r, sigma1, sigma2, &probe) {
            Ok(()) => return Ok((a, r)),
            Err(
                Error::CutTooSmall { .. }
                | Error::ChartBound { .. }
                | Error::FoldOver { .. }
                | Error::MeshBudget { .. }
                | Error::ConeViolation { .. }
                | Error::ContractionViolation { .. },
            ) => {
                r /= 2.0;
                if r < CALIBRATION_FLOOR {
                    return Err(Error::CalibrationFloor { a, r });
                }
            }
            Err(Error::AlignmentViolation { .. }) => {
                a /= 2.0;
                if a < CALIBRATION_FLOOR {
                    return Err(Error::CalibrationFloor { a, r });
                }
            }
            Err(other) => return Err(other),
        }
    }
}

/// One calibration probe: seed, push, and run the cut, contraction, and
/// alignment checks over the probe window, without gap tracking or a
/// certificate.
fn probe_growth(
    system: &dyn SmoothSystem,
    split: &SplittingField,
    x0: &Point,
    a: f64,
    r: f64,
    sigma1: f64,
    sigma2: f64,
    probe: &TimeSet,
) -> Result<()> {
    let h = r / 10.0;
    let cap_radius = FOOTPRINT_CAP_FACTOR * r;
    let mut disk = mesh::seed_disk(split, GraphDomain::E, x0, r, h)?;
    let last = probe.last().expect("non-empty probe");
    for s in 1..=last {
        disk = mesh::push_disk(system, split, &disk, a)?;
        let cap_cells = mesh::snap_count(cap_radius, disk.spacing())?;
        if disk.half_width() > cap_cells {
            disk = mesh::cut_ball(&disk, disk.base(), cap_radius)?;
        }
        if probe.contains(s) {
            let cut = mesh::cut_ball(&disk, disk.base(), r)?;
            let contraction = checks::check_backward_contraction(
                system,
                &cut,
                s.min(checks::F2_DEPTH_CAP),
                sigma1,
            )?;
            if !contraction.pass {
                let worst = contraction.worst_pair.map_or(1, |p| p.depth);
                return Err(Error::ContractionViolation {
                    depth: worst,
                    ratio: contraction.max_ratio,
                    bound: 1.0 + checks::CONTRACTION_SLACK,
                });
            }
            let alignment = checks::check_tangent_alignment(&cut, sigma2, a, s)?;
            if !alignment.pass {
                return Err(Error::AlignmentViolation {
                    step: s as i64,
                    deviation: alignment.max_deviation,
                    bound: alignment.bound,
                });
            }
        }
    }
    Ok(())
}
