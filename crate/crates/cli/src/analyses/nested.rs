//! Nested local manifolds: a line disk over the strongest bundle inside a
//! plane disk over the strongest pair, grown along one orbit and checked
//! for inclusion.
//!
//! The `stable` side grows the same construction for the time-reversed
//! system: its unstable disks are the configured system's stable ones. The
//! bundle order flips accordingly, so the artifacts label the disks by the
//! configured system's exponent-ordered bundle names (`G` inside `F+G` on
//! the stable side, `E` inside `E+F` on the unstable side).
//!
//! Artifacts: `manifold_line.csv`, `manifold_plane.csv`, `nested.json`.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context, Result};
use serde_json::json;

use hyptime_core::grower::{grow_nested, NestedGrowth};
use hyptime_core::phase::{make_orbit, InverseSystem};

use crate::analyses::flag;
use crate::config::{ManifoldSide, NestedSpec, SplittingSpec};
use crate::report::{manifold_csv, manifold_json, ReportWriter};
use crate::runner::{build_splitting, RunContext};

pub fn run(
    context: &RunContext<'_>,
    spec: &NestedSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let (growth, line_bundle, plane_bundle) = match spec.side {
        ManifoldSide::Unstable => {
            let growth = grow_nested(
                &context.system,
                context.orbit()?,
                context.split()?,
                &spec.params,
            )?;
            (growth, "E", "E+F")
        }
        ManifoldSide::Stable => {
            // Reverse time: unstable disks of the reversed system are the
            // configured system's stable disks. Rebuild the orbit and the
            // splitting (bundle order flipped) for the reversed dynamics.
            let reversed = InverseSystem::new(&*context.system);
            let orbit_spec = context
                .config
                .orbit
                .ok_or_else(|| anyhow!("nested growth requires an orbit window"))?;
            let split_spec = context
                .config
                .splitting
                .as_ref()
                .and_then(SplittingSpec::reversed)
                .ok_or_else(|| {
                    anyhow!("stable-side nesting requires a three-bundle splitting")
                })?;
            let settle = split_spec.settle();
            let orbit = make_orbit(
                &reversed,
                &context.x0,
                (orbit_spec.forward + settle) as i64,
                orbit_spec.backward.max(settle) as i64,
            )
            .context("reversed orbit construction failed")?;
            let split = build_splitting(&orbit, &split_spec)
                .context("reversed splitting failed")?;
            let growth = grow_nested(&reversed, &orbit, &split, &spec.params)?;
            (growth, "G", "F+G")
        }
    };
    let NestedGrowth { ef, e, inclusion } = &growth;

    writer.write_text("manifold_line.csv", &manifold_csv(e))?;
    writer.write_text("manifold_plane.csv", &manifold_csv(ef))?;
    writer.write_json(
        "nested.json",
        &json!({
            "side": match spec.side {
                ManifoldSide::Unstable => "unstable",
                ManifoldSide::Stable => "stable",
            },
            "line_bundle": line_bundle,
            "plane_bundle": plane_bundle,
            "inclusion": {
                "max_deviation": inclusion.max_deviation,
                "nodes_compared": inclusion.nodes_compared,
                "nodes_outside": inclusion.nodes_outside,
                "tol": inclusion.tol,
                "pass": inclusion.pass,
            },
            "line": manifold_json(e),
            "plane": manifold_json(ef),
        }),
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("horizon".to_string(), context.horizon as f64);
    metrics.insert(
        "nested.inclusion.max_deviation".to_string(),
        inclusion.max_deviation,
    );
    metrics.insert(
        "nested.inclusion.nodes_outside".to_string(),
        inclusion.nodes_outside as f64,
    );
    metrics.insert("nested.inclusion.pass".to_string(), flag(inclusion.pass));
    metrics.insert("nested.line.final_time".to_string(), e.final_time() as f64);
    metrics.insert(
        "nested.plane.final_time".to_string(),
        ef.final_time() as f64,
    );
    metrics.insert("nested.line.t".to_string(), e.t());
    metrics.insert("nested.plane.t".to_string(), ef.t());
    metrics.insert("nested.line.nodes".to_string(), e.mesh().node_count() as f64);
    metrics.insert(
        "nested.plane.nodes".to_string(),
        ef.mesh().node_count() as f64,
    );
    Ok(metrics)
}
