//! Synthetic inputs: two-level test sequences, block-diagonal cocycles,
//! and the Pliss-frequency threshold calibration. No orbit is run; each
//! requested section generates its artifact directly.
//!
//! Artifacts (per selected section): `sequence.csv`, `calibration.json`,
//! `cocycle.json`.

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;

use hyptime_core::phase::SmoothSystem;
use hyptime_core::synthlab::{calibrate_rho, gen_cocycle, gen_sequence};

use crate::config::SynthSpec;
use crate::report::{csv_num, csv_table, ReportWriter};
use crate::runner::RunContext;

pub fn run(
    _context: &RunContext<'_>,
    spec: &SynthSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let mut metrics = BTreeMap::new();

    if let Some(seq_spec) = &spec.sequence {
        let seq = gen_sequence(seq_spec)?;
        let small_count = seq
            .values()
            .iter()
            .filter(|&&v| v < seq_spec.small_value)
            .count();
        writer.write_text(
            "sequence.csv",
            &csv_table(
                &["index", "value"],
                seq.values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| vec![i.to_string(), csv_num(v)]),
            ),
        )?;
        metrics.insert("synth.sequence.len".to_string(), seq.len() as f64);
        metrics.insert(
            "synth.sequence.small_count".to_string(),
            small_count as f64,
        );
    }

    if let Some(cal) = &spec.calibration {
        let rho = calibrate_rho(cal.bound_l, cal.eta, cal.zeta, cal.theta, cal.length)?;
        writer.write_json(
            "calibration.json",
            &json!({
                "bound_l": cal.bound_l,
                "eta": cal.eta,
                "zeta": cal.zeta,
                "theta": cal.theta,
                "length": cal.length,
                "rho": rho,
            }),
        )?;
        metrics.insert("synth.rho".to_string(), rho);
    }

    if let Some(coc) = &spec.cocycle {
        let system = gen_cocycle(coc)?;
        writer.write_json(
            "cocycle.json",
            &json!({
                "dim": system.dim(),
                "window": coc.window,
                "blocks": coc.blocks,
                "mean_rates": system.mean_rates(),
            }),
        )?;
        metrics.insert("synth.cocycle.dim".to_string(), system.dim() as f64);
        metrics.insert(
            "synth.cocycle.blocks".to_string(),
            coc.blocks.len() as f64,
        );
    }

    Ok(metrics)
}
