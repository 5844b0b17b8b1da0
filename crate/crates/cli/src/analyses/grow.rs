//! Local-manifold growth along one orbit: select hyperbolic times, grow
//! the unstable disk, measure its certificate, and verify it by backward
//! iteration.
//!
//! Artifacts: `manifold.csv` (the grid: indices, positions, tangent
//! frames), `certificate.json`, `gaps.csv` (Cauchy gaps between
//! consecutive cuts), `verification.json`.

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;

use hyptime_core::grower::{
    calibrate_a_r, grow_unstable, verify_local_manifold, CERT_MIN_DEPTH,
};
use hyptime_core::times::{hd_times, SeqKind};

use crate::analyses::flag;
use crate::config::GrowSpec;
use crate::report::{gaps_csv, manifold_csv, manifold_json, ReportWriter};
use crate::runner::RunContext;

pub fn run(
    context: &RunContext<'_>,
    spec: &GrowSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let seq_e = context.sequence(SeqKind::LogMiniE, spec.ell)?;
    let seq_ratio = context.sequence(SeqKind::LogRatio, spec.ell)?;
    let hd = hd_times(&seq_e, &seq_ratio, spec.log_lambda1, spec.log_lambda2)?;

    let mut params = spec.params.clone();
    if spec.calibrate {
        let (a, r) = calibrate_a_r(
            &context.system,
            context.split()?,
            &context.x0,
            params.sigma1,
            params.sigma2,
            spec.log_lambda1,
            &hd,
        )?;
        // Keep the spacing close to the requested one while staying an
        // exact divisor of the calibrated radius.
        let cells = (r / params.h).round().max(1.0);
        params.a = a;
        params.r = r;
        params.h = r / cells;
    }

    let manifold = grow_unstable(&context.system, context.split()?, &context.x0, &params, &hd)?;
    let depth = spec.verify_depth.unwrap_or(CERT_MIN_DEPTH);
    let verification = verify_local_manifold(&context.system, &manifold, depth)?;

    writer.write_text("manifold.csv", &manifold_csv(&manifold))?;
    writer.write_json("certificate.json", &manifold_json(&manifold))?;
    writer.write_text("gaps.csv", &gaps_csv(&manifold))?;
    writer.write_json(
        "verification.json",
        &json!({
            "pass": verification.pass,
            "max_ratio": verification.max_ratio,
            "violations": verification.violations,
            "depth": verification.depth,
            "pairs_checked": verification.pairs_checked,
            "resolved_depth": verification.resolved_depth,
        }),
    )?;

    let last_c1 = manifold.convergence_log().last().map_or(0.0, |g| g.c1);
    let last_c0 = manifold.convergence_log().last().map_or(0.0, |g| g.c0);
    let mut metrics = BTreeMap::new();
    metrics.insert("horizon".to_string(), context.horizon as f64);
    metrics.insert("grow.final_time".to_string(), manifold.final_time() as f64);
    metrics.insert("grow.chi".to_string(), manifold.chi());
    metrics.insert("grow.t".to_string(), manifold.t());
    metrics.insert("grow.radius".to_string(), manifold.radius());
    metrics.insert("grow.cone_width".to_string(), params.a);
    metrics.insert("grow.nodes".to_string(), manifold.mesh().node_count() as f64);
    metrics.insert(
        "grow.times_used".to_string(),
        manifold.hyperbolic_times_used().len() as f64,
    );
    metrics.insert("grow.last_c0".to_string(), last_c0);
    metrics.insert("grow.last_c1".to_string(), last_c1);
    metrics.insert(
        "grow.min_e_expansion".to_string(),
        manifold.min_e_expansion(),
    );
    metrics.insert("grow.t_depth".to_string(), manifold.t_depth() as f64);
    metrics.insert(
        "grow.t_resolved_depth".to_string(),
        manifold.t_resolved_depth() as f64,
    );
    metrics.insert("verify.pass".to_string(), flag(verification.pass));
    metrics.insert(
        "verify.violations".to_string(),
        verification.violations as f64,
    );
    metrics.insert("verify.max_ratio".to_string(), verification.max_ratio);
    metrics.insert(
        "verify.resolved_depth".to_string(),
        verification.resolved_depth as f64,
    );
    Ok(metrics)
}
