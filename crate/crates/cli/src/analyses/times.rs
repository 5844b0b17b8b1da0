//! Single-orbit time selection: hyperbolic times, the averaged-domination
//! prefix, their intersection, and density statistics.
//!
//! Artifacts: `times.json` (the three selections with thresholds and
//! horizon), `density.csv` (per-step prefix frequencies of the joint
//! selection), `density.json`.

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;

use hyptime_core::times::{
    averaged_domination_prefix, density, hd_times, hyperbolic_times, SeqKind,
};

use crate::config::TimesSpec;
use crate::report::{density_json, timeset_json, ReportWriter};
use crate::runner::RunContext;

pub fn run(
    context: &RunContext<'_>,
    spec: &TimesSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let seq_e = context.sequence(SeqKind::LogMiniE, spec.ell)?;
    let seq_ratio = context.sequence(SeqKind::LogRatio, spec.ell)?;

    let hyp = hyperbolic_times(&seq_e, spec.log_lambda1)?;
    let prefix = averaged_domination_prefix(&seq_ratio, spec.log_lambda2)?;
    let hd = hd_times(&seq_e, &seq_ratio, spec.log_lambda1, spec.log_lambda2)?;
    let stats = density(&hd)?;

    writer.write_json(
        "times.json",
        &json!({
            "hyperbolic": timeset_json(&hyp),
            "domination_prefix": prefix,
            "joint": timeset_json(&hd),
        }),
    )?;
    writer.write_text("density.csv", &stats.profile_csv())?;
    writer.write_json("density.json", &density_json(&stats))?;

    let mut metrics = BTreeMap::new();
    metrics.insert("horizon".to_string(), hd.horizon() as f64);
    metrics.insert("hyperbolic.count".to_string(), hyp.len() as f64);
    metrics.insert("prefix.depth".to_string(), prefix as f64);
    metrics.insert("times.count".to_string(), hd.len() as f64);
    metrics.insert(
        "times.first".to_string(),
        hd.first().map_or(0.0, |t| t as f64),
    );
    metrics.insert(
        "times.last".to_string(),
        hd.last().map_or(0.0, |t| t as f64),
    );
    metrics.insert("density.lower".to_string(), stats.d_lower_est);
    metrics.insert("density.upper".to_string(), stats.d_upper_est);
    Ok(metrics)
}
