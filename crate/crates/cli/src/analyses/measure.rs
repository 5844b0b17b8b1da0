//! Monte Carlo sweep of block measures `mu(B_ell)` across block lengths.
//!
//! Each sample draws an independent start from the base invariant measure
//! of the configured system — a fresh base itinerary (clock zero, zero
//! fiber) for doubling-map skew products, a Lebesgue-uniform torus point
//! for `cat2`, the fixed point for `diag3` — runs one truncated orbit, and
//! asks for each block length whether that orbit passes the block test.
//! Per-`ell` pass fractions come with Wilson 95% intervals.
//!
//! Samples run in parallel; every sample derives its own seed stream from
//! the run seed and its index, so the result is independent of scheduling.
//!
//! Artifacts: `measure.csv` (`ell, estimate, lo, hi`), `measure.json`.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use hyptime_core::phase::{
    make_orbit, skew_nonuniform, Cat2, Diag3, InverseSystem, Point, SkewSystem, SmoothSystem,
    Space,
};
use hyptime_core::rng;
use hyptime_core::times::{block_h, block_lambda, high_density_block, SeqKind};

use crate::analyses::flag;
use crate::config::{BlockKind, MeasureSweepSpec, SystemSpec};
use crate::report::{estimates_csv, FrequencyEstimate, ReportWriter};
use crate::runner::{build_splitting, truncated_sequence, RunContext};

/// One start point drawn from the base invariant measure, with the system
/// realization it lives on.
fn sample_system(
    spec: &SystemSpec,
    rng: &mut impl Rng,
) -> Result<(Box<dyn SmoothSystem>, Point)> {
    match spec {
        SystemSpec::Cat2 => {
            // Haar (Lebesgue) measure on the torus.
            let coords = [rng.random::<f64>(), rng.random::<f64>()];
            let x0 = Point::from_slice(Space::Torus(2), &coords)?;
            Ok((Box::new(Cat2), x0))
        }
        SystemSpec::Diag3 => {
            // The only invariant probability of the linear model is the
            // Dirac mass at the fixed point.
            let x0 = Point::from_slice(Space::Euclidean(3), &[0.0; 3])?;
            Ok((Box::new(Diag3), x0))
        }
        SystemSpec::Diag3Inverse => {
            let x0 = Point::from_slice(Space::Euclidean(3), &[0.0; 3])?;
            Ok((Box::new(InverseSystem::new(Diag3)), x0))
        }
        SystemSpec::SkewNonuniform { window } => {
            // A fresh itinerary seed samples the Bernoulli base measure.
            let system = skew_nonuniform(*window, rng.random())?;
            let x0 = system.point_at(0, &[0.0, 0.0])?;
            Ok((Box::new(system), x0))
        }
        SystemSpec::Skew { window, blocks } => {
            let system = SkewSystem::new(blocks.clone(), *window, rng.random())?;
            let fiber = vec![0.0; system.dim() - 1];
            let x0 = system.point_at(0, &fiber)?;
            Ok((Box::new(system), x0))
        }
    }
}

/// Block verdicts for one sampled orbit, one bool per configured `ell`.
fn sample_verdicts(
    context: &RunContext<'_>,
    spec: &MeasureSweepSpec,
    index: u64,
) -> Result<Vec<bool>> {
    let config = context.config;
    let mut stream = rng::stream(config.seed, "sample", index);
    let (system, x0) = sample_system(&config.system, &mut stream)?;
    let orbit_spec = config
        .orbit
        .ok_or_else(|| anyhow!("measure sweep requires an orbit window"))?;
    let split_spec = config
        .splitting
        .as_ref()
        .ok_or_else(|| anyhow!("measure sweep requires a splitting"))?;
    let settle = split_spec.settle();
    let orbit = make_orbit(
        &*system,
        &x0,
        (orbit_spec.forward + settle) as i64,
        orbit_spec.backward.max(settle) as i64,
    )
    .with_context(|| format!("sample {index}: orbit construction failed"))?;
    let split = build_splitting(&orbit, split_spec)
        .with_context(|| format!("sample {index}: splitting failed"))?;

    let horizon = orbit_spec.forward;
    let mut verdicts = Vec::with_capacity(spec.ells.len());
    for &ell in &spec.ells {
        let verdict = match spec.block {
            BlockKind::H => {
                let seq_f = truncated_sequence(&orbit, &split, SeqKind::LogNormF, ell, horizon)?;
                block_h(&seq_f, spec.gamma2)?.is_member_truncated
            }
            BlockKind::Lambda => {
                let seq_e = truncated_sequence(&orbit, &split, SeqKind::LogMiniE, ell, horizon)?;
                let seq_f = truncated_sequence(&orbit, &split, SeqKind::LogNormF, ell, horizon)?;
                let gamma1 = spec
                    .gamma1
                    .ok_or_else(|| anyhow!("lambda blocks need gamma1"))?;
                block_lambda(&seq_e, &seq_f, gamma1, spec.gamma2)?.is_member_truncated
            }
            BlockKind::HighDensity => {
                let seq_e = truncated_sequence(&orbit, &split, SeqKind::LogMiniE, ell, horizon)?;
                let seq_ratio =
                    truncated_sequence(&orbit, &split, SeqKind::LogRatio, ell, horizon)?;
                let gamma1 = spec
                    .gamma1
                    .ok_or_else(|| anyhow!("high-density blocks need gamma1"))?;
                let theta = spec
                    .theta
                    .ok_or_else(|| anyhow!("high-density blocks need theta"))?;
                high_density_block(&seq_e, &seq_ratio, gamma1, spec.gamma2, theta, ell)?.0
            }
        };
        verdicts.push(verdict);
    }
    Ok(verdicts)
}

/// True when some nondecreasing sequence threads all the intervals:
/// every running maximum of lower ends stays at or below each later
/// upper end.
fn nondecreasing_within_ci(estimates: &[FrequencyEstimate]) -> bool {
    let mut floor = f64::NEG_INFINITY;
    for e in estimates {
        floor = floor.max(e.lo);
        if floor > e.hi {
            return false;
        }
    }
    true
}

pub fn run(
    context: &RunContext<'_>,
    spec: &MeasureSweepSpec,
    writer: &mut ReportWriter,
) -> Result<BTreeMap<String, f64>> {
    let per_sample: Vec<Vec<bool>> = (0..spec.samples)
        .into_par_iter()
        .map(|i| sample_verdicts(context, spec, i))
        .collect::<Result<_>>()?;

    let horizon = context.horizon;
    let mut estimates = Vec::with_capacity(spec.ells.len());
    for (j, &ell) in spec.ells.iter().enumerate() {
        let successes = per_sample.iter().filter(|v| v[j]).count() as u64;
        estimates.push(FrequencyEstimate::new(
            spec.block.label(),
            ell,
            successes,
            spec.samples,
            horizon,
        ));
    }
    let monotone = nondecreasing_within_ci(&estimates);

    writer.write_text("measure.csv", &estimates_csv(&estimates))?;
    writer.write_json(
        "measure.json",
        &json!({
            "block": spec.block.label(),
            "samples": spec.samples,
            "horizon": horizon,
            "estimates": estimates,
            "nondecreasing_within_ci": monotone,
        }),
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("horizon".to_string(), horizon as f64);
    metrics.insert("measure.samples".to_string(), spec.samples as f64);
    for e in &estimates {
        metrics.insert(format!("measure.estimate.ell{}", e.ell), e.estimate);
        metrics.insert(format!("measure.lo.ell{}", e.ell), e.lo);
        metrics.insert(format!("measure.hi.ell{}", e.ell), e.hi);
    }
    metrics.insert(
        "measure.nondecreasing_within_ci".to_string(),
        flag(monotone),
    );
    if let Some(last) = estimates.last() {
        metrics.insert("measure.final_estimate".to_string(), last.estimate);
    }
    Ok(metrics)
}
