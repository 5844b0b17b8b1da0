//! Experiment orchestration: build the configured system, orbit, and
//! splitting, dispatch the selected analysis, evaluate expectations, and
//! write the report bundle.
//!
//! A bundle always contains `manifest.json` (config echo, tool versions,
//! seed, artifact list). Runs with an analysis add its artifacts plus
//! `summary.txt`. Identical configs produce byte-identical bundles.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;

use hyptime_core::bundle::{estimate_splitting, SplittingField, Subspace};
use hyptime_core::phase::{
    make_orbit, skew_nonuniform, Cat2, Diag3, InverseSystem, OrbitSegment, Point, SkewSystem,
    SmoothSystem, Space,
};
use hyptime_core::rng;
use hyptime_core::times::{step_logs, SeqKind, StepLogSequence};

use crate::analyses;
use crate::config::{
    AnalysisSpec, ConfigError, ExperimentConfig, Expectation, OrbitSpec, SplittingSpec,
    SystemSpec,
};
use crate::report::{render_summary, ReportWriter};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub samples: Option<u64>,
}

/// Fold the overrides into the config; the result must be re-validated.
pub fn apply_overrides(
    config: &mut ExperimentConfig,
    overrides: &Overrides,
) -> Result<(), ConfigError> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(horizon) = overrides.horizon {
        match &mut config.orbit {
            Some(orbit) => orbit.forward = horizon,
            None => {
                config.orbit = Some(OrbitSpec {
                    forward: horizon,
                    backward: 0,
                })
            }
        }
    }
    if let Some(samples) = overrides.samples {
        match &mut config.analysis {
            Some(AnalysisSpec::MeasureSweep(spec)) => spec.samples = samples,
            _ => {
                return Err(ConfigError {
                    pointer: "/analysis".to_string(),
                    message: "--samples applies only to measure-sweep configurations".to_string(),
                })
            }
        }
    }
    Ok(())
}

/// What one finished run reports back to the caller.
#[derive(Debug)]
pub struct RunOutcome {
    /// Flat metric table every expectation is evaluated against.
    pub metrics: BTreeMap<String, f64>,
    /// Human-readable PASS/FAIL line per declared expectation.
    pub expectation_lines: Vec<String>,
    /// Number of failed expectations.
    pub failures: usize,
    /// Relative names of the written artifacts.
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Everything an analysis may consume, built once per run.
pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub system: Box<dyn SmoothSystem>,
    pub x0: Point,
    pub orbit: Option<OrbitSegment>,
    pub split: Option<SplittingField>,
    /// Analysis horizon `N` (orbit steps, before settle padding).
    pub horizon: u64,
}

impl RunContext<'_> {
    pub fn orbit(&self) -> Result<&OrbitSegment> {
        self.orbit
            .as_ref()
            .ok_or_else(|| anyhow!("analysis requires an orbit"))
    }

    pub fn split(&self) -> Result<&SplittingField> {
        self.split
            .as_ref()
            .ok_or_else(|| anyhow!("analysis requires a splitting"))
    }

    /// A step-log sequence truncated to exactly `floor(N / ell)` blocks,
    /// so selection horizons match the configured horizon rather than the
    /// padded orbit window.
    pub fn sequence(&self, kind: SeqKind, ell: usize) -> Result<StepLogSequence> {
        truncated_sequence(self.orbit()?, self.split()?, kind, ell, self.horizon)
    }
}

/// Step logs over `orbit` truncated to exactly `floor(horizon / ell)`
/// blocks; the padded tail of the orbit never reaches selection.
pub fn truncated_sequence(
    orbit: &OrbitSegment,
    split: &SplittingField,
    kind: SeqKind,
    ell: usize,
    horizon: u64,
) -> Result<StepLogSequence> {
    let full = step_logs(orbit, split, kind, ell)?;
    let want = (horizon / ell as u64) as usize;
    if want == 0 {
        return Err(anyhow!("horizon {horizon} too short for block length {ell}"));
    }
    if want >= full.len() {
        return Ok(full);
    }
    Ok(StepLogSequence::new(
        full.values()[..want].to_vec(),
        full.kind(),
        ell,
    )?)
}

/// The seed a run derives for its skew-product base itinerary.
pub fn system_seed(seed: u64) -> u64 {
    rng::stream(seed, "system", 0).random()
}

/// Construct the configured system together with the orbit start point.
///
/// Canonical starts: the origin fixed point for `cat2` and `diag3`, clock
/// zero for skew products. Explicit `start` coordinates override the
/// position (for skew systems they set the fiber; the clock stays zero).
pub fn build_system(
    spec: &SystemSpec,
    start: &Option<Vec<f64>>,
    seed: u64,
) -> Result<(Box<dyn SmoothSystem>, Point)> {
    match spec {
        SystemSpec::Cat2 => {
            let coords = start.clone().unwrap_or_else(|| vec![0.0, 0.0]);
            let x0 = Point::from_slice(Space::Torus(2), &coords)?;
            Ok((Box::new(Cat2), x0))
        }
        SystemSpec::Diag3 => {
            let coords = start.clone().unwrap_or_else(|| vec![0.0; 3]);
            let x0 = Point::from_slice(Space::Euclidean(3), &coords)?;
            Ok((Box::new(Diag3), x0))
        }
        SystemSpec::Diag3Inverse => {
            let coords = start.clone().unwrap_or_else(|| vec![0.0; 3]);
            let x0 = Point::from_slice(Space::Euclidean(3), &coords)?;
            Ok((Box::new(InverseSystem::new(Diag3)), x0))
        }
        SystemSpec::SkewNonuniform { window } => {
            let system = skew_nonuniform(*window, system_seed(seed))?;
            let fiber = start.clone().unwrap_or_else(|| vec![0.0; 2]);
            let x0 = system.point_at(0, &fiber)?;
            Ok((Box::new(system), x0))
        }
        SystemSpec::Skew { window, blocks } => {
            let system = SkewSystem::new(blocks.clone(), *window, system_seed(seed))?;
            let fiber = start.clone().unwrap_or_else(|| vec![0.0; system.dim() - 1]);
            let x0 = system.point_at(0, &fiber)?;
            Ok((Box::new(system), x0))
        }
    }
}

/// Span of the listed coordinate axes.
fn axis_span(ambient: usize, axes: &[usize]) -> Result<Subspace> {
    let mut m = DMatrix::<f64>::zeros(ambient, axes.len());
    for (col, &i) in axes.iter().enumerate() {
        m[(i, col)] = 1.0;
    }
    Ok(Subspace::span(&m)?)
}

/// Build the configured splitting along the orbit.
pub fn build_splitting(
    orbit: &OrbitSegment,
    spec: &SplittingSpec,
) -> Result<SplittingField> {
    let ambient = orbit.dim();
    match spec {
        SplittingSpec::Settled { dims, settle } => {
            Ok(estimate_splitting(orbit, *dims, *settle)?)
        }
        SplittingSpec::Axes { e, f, g } => {
            let e = axis_span(ambient, e)?;
            let f = axis_span(ambient, f)?;
            let g = g.as_ref().map(|g| axis_span(ambient, g)).transpose()?;
            Ok(SplittingField::constant(orbit, e, f, g)?)
        }
        SplittingSpec::AnalyticTorus => {
            let u = Cat2::unstable_direction();
            let s = Cat2::stable_direction();
            let e = Subspace::span(&DMatrix::from_column_slice(2, 1, &[u[0], u[1]]))?;
            let f = Subspace::span(&DMatrix::from_column_slice(2, 1, &[s[0], s[1]]))?;
            Ok(SplittingField::constant(orbit, e, f, None)?)
        }
    }
}

/// Build the run context: system, start point, padded orbit, splitting.
pub fn build_context<'a>(config: &'a ExperimentConfig) -> Result<RunContext<'a>> {
    let (system, x0) = build_system(&config.system, &config.start, config.seed)?;
    let analysis = config.analysis.as_ref();
    let needs_orbit = analysis.is_some_and(|a| a.needs_orbit());
    let (orbit, split, horizon) = if needs_orbit {
        let spec = config
            .orbit
            .ok_or_else(|| anyhow!("analysis requires an orbit window"))?;
        let settle = config
            .splitting
            .as_ref()
            .map_or(0, SplittingSpec::settle);
        // Settled estimation discards `settle` steps at each end; pad the
        // window so the splitting still covers `[-(backward), N]`.
        let n_forward = (spec.forward + settle) as i64;
        let n_backward = spec.backward.max(settle) as i64;
        let orbit = make_orbit(&*system, &x0, n_forward, n_backward)
            .context("orbit construction failed")?;
        let split = match &config.splitting {
            Some(s) => Some(build_splitting(&orbit, s).context("splitting failed")?),
            None => None,
        };
        (Some(orbit), split, spec.forward)
    } else {
        (None, None, 0)
    };
    Ok(RunContext {
        config,
        system,
        x0,
        orbit,
        split,
        horizon,
    })
}

/// Evaluate declared expectations against the metric table.
fn evaluate_expectations(
    expectations: &[Expectation],
    metrics: &BTreeMap<String, f64>,
) -> (Vec<String>, usize) {
    let mut lines = Vec::new();
    let mut failures = 0usize;
    for e in expectations {
        match metrics.get(&e.metric) {
            None => {
                failures += 1;
                lines.push(format!(
                    "FAIL {} {} {} (metric not reported by this analysis)",
                    e.metric,
                    e.op.symbol(),
                    e.value
                ));
            }
            Some(&actual) => {
                let ok = e.holds(actual);
                if !ok {
                    failures += 1;
                }
                let tol = match e.op {
                    crate::config::CompareOp::Within => {
                        format!(" tol {}", e.tol.unwrap_or(0.0))
                    }
                    _ => String::new(),
                };
                lines.push(format!(
                    "{} {} {} {}{} (actual {})",
                    if ok { "PASS" } else { "FAIL" },
                    e.metric,
                    e.op.symbol(),
                    e.value,
                    tol,
                    actual
                ));
            }
        }
    }
    (lines, failures)
}

/// Run one experiment and write its report bundle into `out_dir`.
///
/// Errors returned here are runtime failures (exit code 3); configuration
/// problems must be caught by [`ExperimentConfig::validate`] beforehand.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let mut writer = ReportWriter::new(out_dir)?;

    let (metrics, horizon) = match &config.analysis {
        None => (BTreeMap::new(), None),
        Some(analysis) => {
            let context = build_context(config)?;
            let metrics = match analysis {
                AnalysisSpec::Times(spec) => {
                    analyses::times::run(&context, spec, &mut writer)?
                }
                AnalysisSpec::Blocks(spec) => {
                    analyses::blocks::run(&context, spec, &mut writer)?
                }
                AnalysisSpec::Grow(spec) => {
                    analyses::grow::run(&context, spec, &mut writer)?
                }
                AnalysisSpec::Nested(spec) => {
                    analyses::nested::run(&context, spec, &mut writer)?
                }
                AnalysisSpec::MeasureSweep(spec) => {
                    analyses::measure::run(&context, spec, &mut writer)?
                }
                AnalysisSpec::Synth(spec) => {
                    analyses::synth::run(&context, spec, &mut writer)?
                }
            };
            let horizon = analysis.needs_orbit().then_some(context.horizon);
            (metrics, horizon)
        }
    };

    let (expectation_lines, failures) = evaluate_expectations(&config.expectations, &metrics);

    if let Some(analysis) = &config.analysis {
        let summary = render_summary(
            analysis.kind(),
            config.system.name(),
            config.seed,
            horizon,
            &metrics,
            &expectation_lines,
            failures == 0,
        );
        writer.write_text("summary.txt", &summary)?;
    }

    let manifest = json!({
        "tool": {
            "name": "hyptime",
            "version": env!("CARGO_PKG_VERSION"),
            "core": hyptime_core_version(),
        },
        "seed": config.seed,
        "analysis": config.analysis.as_ref().map(|a| a.kind()),
        "config": config,
        "artifacts": writer.files(),
    });
    writer.write_json("manifest.json", &manifest)?;

    Ok(RunOutcome {
        metrics,
        expectation_lines,
        failures,
        files: writer.files().to_vec(),
    })
}

fn hyptime_core_version() -> &'static str {
    // The workspace pins both crates to one version line.
    env!("CARGO_PKG_VERSION")
}
