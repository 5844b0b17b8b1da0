//! Single-orbit block membership: the contraction-only block, the
//! two-sided block, the block-to-domination consistency check, and the
//! high-density joint selection.
//!
//! Artifacts: `blocks.json` (all verdicts), `hd_density.csv` (prefix
//! frequencies of the joint selection behind the high-density verdict).

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;

use hyptime_core::times::{
    block_h, block_lambda, block_to_domination_check, high_density_block, t_ell_times, SeqKind,
};

use crate::analyses::flag;
use crate::config::BlocksSpec;
use crate::report::{density_json, ReportWriter};
use crate::runner::RunContext;

pub fn run(
    context: &RunContext<'_>,
    spec: &BlocksSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let seq_e = context.sequence(SeqKind::LogMiniE, spec.ell)?;
    let seq_f = context.sequence(SeqKind::LogNormF, spec.ell)?;
    let seq_ratio = context.sequence(SeqKind::LogRatio, spec.ell)?;

    let h = block_h(&seq_f, spec.gamma2)?;
    let lambda = block_lambda(&seq_e, &seq_f, spec.gamma1, spec.gamma2)?;
    let consistent = block_to_domination_check(
        &seq_e,
        &seq_f,
        spec.gamma1,
        spec.gamma2,
        seq_e.len(),
    )?;
    let contraction_times = t_ell_times(&seq_f, spec.gamma2)?;
    let (hd_member, hd_stats) = high_density_block(
        &seq_e,
        &seq_ratio,
        spec.gamma1,
        spec.gamma2,
        spec.theta,
        spec.ell,
    )?;

    writer.write_json(
        "blocks.json",
        &json!({
            "h": h,
            "lambda": lambda,
            "domination_consistent": consistent,
            "contraction_times": contraction_times.times(),
            "high_density": {
                "member": hd_member,
                "theta": spec.theta,
                "density": density_json(&hd_stats),
            },
        }),
    )?;
    writer.write_text("hd_density.csv", &hd_stats.profile_csv())?;

    let mut metrics = BTreeMap::new();
    metrics.insert("horizon".to_string(), lambda.horizon as f64);
    metrics.insert("blocks.h.member_up_to".to_string(), h.member_up_to as f64);
    metrics.insert("blocks.h.truncated".to_string(), flag(h.is_member_truncated));
    metrics.insert(
        "blocks.lambda.member_up_to".to_string(),
        lambda.member_up_to as f64,
    );
    metrics.insert(
        "blocks.lambda.truncated".to_string(),
        flag(lambda.is_member_truncated),
    );
    metrics.insert("blocks.domination_consistent".to_string(), flag(consistent));
    metrics.insert(
        "blocks.contraction_times.count".to_string(),
        contraction_times.len() as f64,
    );
    metrics.insert("blocks.hd.member".to_string(), flag(hd_member));
    metrics.insert("blocks.hd.lower".to_string(), hd_stats.d_lower_est);
    metrics.insert("blocks.hd.upper".to_string(), hd_stats.d_upper_est);
    Ok(metrics)
}
