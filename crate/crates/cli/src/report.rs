//! Report emission: deterministic CSV and JSON artifacts.
//!
//! Every writer here is bit-stable: the same inputs produce byte-identical
//! files. Numbers are formatted with `{:.17e}` in CSV (17 significant
//! digits round-trip any f64) and with serde_json's shortest-roundtrip
//! encoding in JSON. The decimal separator is always `.`; no locale is
//! consulted anywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use hyptime_core::grower::LocalManifold;
use hyptime_core::times::{DensityStats, TimeSet};

/// Two-sided 95% normal quantile used by the Wilson interval.
pub const WILSON_Z: f64 = 1.959963984540054;

/// A Monte Carlo frequency estimate with its Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    /// What was counted (e.g. `lambda-block`).
    pub quantity: String,
    /// Block length the estimate refers to.
    pub ell: usize,
    /// Point estimate `successes / samples`, in `[0, 1]`.
    pub estimate: f64,
    /// Lower end of the Wilson 95% interval.
    pub lo: f64,
    /// Upper end of the Wilson 95% interval.
    pub hi: f64,
    /// Number of Monte Carlo samples.
    pub samples: u64,
    /// Orbit horizon each verdict was truncated at.
    pub horizon: u64,
}

impl FrequencyEstimate {
    pub fn new(quantity: &str, ell: usize, successes: u64, samples: u64, horizon: u64) -> Self {
        assert!(samples > 0, "estimates need at least one sample");
        assert!(successes <= samples, "successes cannot exceed samples");
        let estimate = successes as f64 / samples as f64;
        let (lo, hi) = wilson_interval(successes, samples);
        Self {
            quantity: quantity.to_string(),
            ell,
            estimate,
            lo,
            hi,
            samples,
            horizon,
        }
    }

    /// Interval width `hi - lo`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Wilson score interval at 95% confidence for `successes` out of
/// `samples` Bernoulli trials. Always contains the point estimate and
/// stays inside `[0, 1]`.
pub fn wilson_interval(successes: u64, samples: u64) -> (f64, f64) {
    assert!(samples > 0 && successes <= samples);
    let n = samples as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (WILSON_Z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // In exact arithmetic the interval contains `p` and sits inside
    // `[0, 1]`; enforce both against roundoff at the degenerate ends.
    let lo = (center - half).max(0.0).min(p);
    let hi = (center + half).min(1.0).max(p);
    (lo, hi)
}

/// Collects the artifacts of one run and writes them under a single
/// directory, recording relative paths for the manifest.
pub struct ReportWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl ReportWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Relative names of everything written so far.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }
}

/// Format one float for CSV: 17 significant digits, scientific, `.`
/// decimal separator.
pub fn csv_num(v: f64) -> String {
    format!("{v:.17e}")
}

/// A CSV table from a header and rows of pre-formatted cells.
pub fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// The mesh of a grown manifold as CSV: grid indices, then position
/// coordinates, then the tangent frame in column-major order.
pub fn manifold_csv(manifold: &LocalManifold) -> String {
    let mesh = manifold.mesh();
    let ambient = mesh.base().dim();
    let k = mesh.graph_dim();
    let mut header: Vec<String> = vec!["grid_index_1".to_string(), "grid_index_2".to_string()];
    for c in 0..ambient {
        header.push(format!("position_{c}"));
    }
    for col in 0..k {
        for row in 0..ambient {
            header.push(format!("tangent_frame_{row}_{col}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut nodes: Vec<&hyptime_core::grower::MeshNode> = mesh.nodes().iter().collect();
    nodes.sort_by_key(|n| (n.idx[0], n.idx[1]));
    let rows = nodes.into_iter().map(|node| {
        let mut row = vec![node.idx[0].to_string(), node.idx[1].to_string()];
        for c in 0..ambient {
            row.push(csv_num(node.position.coords()[c]));
        }
        let frame = node.tangent.frame();
        for col in 0..k {
            for r in 0..ambient {
                row.push(csv_num(frame[(r, col)]));
            }
        }
        row
    });
    csv_table(&header_refs, rows)
}

/// Certificate and growth evidence of a manifold as JSON.
pub fn manifold_json(manifold: &LocalManifold) -> serde_json::Value {
    json!({
        "chi": manifold.chi(),
        "t": manifold.t(),
        "radius": manifold.radius(),
        "final_time": manifold.final_time(),
        "t_depth": manifold.t_depth(),
        "t_resolved_depth": manifold.t_resolved_depth(),
        "min_e_expansion": manifold.min_e_expansion(),
        "node_count": manifold.mesh().node_count(),
        "graph_dim": manifold.mesh().graph_dim(),
        "spacing": manifold.mesh().spacing(),
        "hyperbolic_times_used": manifold.hyperbolic_times_used().times(),
        "gaps": manifold
            .convergence_log()
            .iter()
            .map(|g| json!({"time": g.time, "c0": g.c0, "c1": g.c1}))
            .collect::<Vec<_>>(),
    })
}

/// Gap log as CSV (`time,c0,c1`).
pub fn gaps_csv(manifold: &LocalManifold) -> String {
    csv_table(
        &["time", "c0", "c1"],
        manifold.convergence_log().iter().map(|g| {
            vec![g.time.to_string(), csv_num(g.c0), csv_num(g.c1)]
        }),
    )
}

/// A selected time set as JSON (times, horizon, thresholds).
pub fn timeset_json(ts: &TimeSet) -> serde_json::Value {
    serde_json::to_value(ts).expect("time sets serialize")
}

/// Density statistics as JSON, without the per-step profile (that lives
/// in its own CSV).
pub fn density_json(stats: &DensityStats) -> serde_json::Value {
    json!({
        "d_lower_est": stats.d_lower_est,
        "d_upper_est": stats.d_upper_est,
        "window": [stats.window.0, stats.window.1],
    })
}

/// Frequency estimates as the `ell,estimate,lo,hi` CSV.
pub fn estimates_csv(estimates: &[FrequencyEstimate]) -> String {
    csv_table(
        &["ell", "estimate", "lo", "hi"],
        estimates.iter().map(|e| {
            vec![
                e.ell.to_string(),
                csv_num(e.estimate),
                csv_num(e.lo),
                csv_num(e.hi),
            ]
        }),
    )
}

/// Render the human-readable run summary.
///
/// The horizon is stated up front: every "for all n" verdict in the
/// artifacts is truncated at it.
pub fn render_summary(
    analysis: &str,
    system: &str,
    seed: u64,
    horizon: Option<u64>,
    metrics: &BTreeMap<String, f64>,
    expectation_lines: &[String],
    passed: bool,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("analysis: {analysis}\n"));
    out.push_str(&format!("system: {system}\n"));
    out.push_str(&format!("seed: {seed}\n"));
    match horizon {
        Some(n) => out.push_str(&format!(
            "horizon: N = {n} (every \"for all n\" verdict is certified up to N only)\n"
        )),
        None => out.push_str("horizon: none (no orbit consumed)\n"),
    }
    out.push_str("metrics:\n");
    for (k, v) in metrics {
        out.push_str(&format!("  {k} = {v}\n"));
    }
    if expectation_lines.is_empty() {
        out.push_str("expectations: none declared\n");
    } else {
        out.push_str("expectations:\n");
        for line in expectation_lines {
            out.push_str(&format!("  {line}\n"));
        }
    }
    out.push_str(&format!("result: {}\n", if passed { "PASS" } else { "FAIL" }));
    out
}
