//! Experiment configuration: JSON layout, schema constants, and the
//! validation pass that turns malformed requests into pointered errors
//! before any computation starts.
//!
//! Every constraint checked here is a *configuration* error (exit code 2),
//! as opposed to a failure encountered while computing (exit code 3).

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hyptime_core::grower::GrowerParams;
use hyptime_core::synthlab::{CocycleSpec, SequenceSpec};

/// The JSON schema shipped with this crate; configs are documented and
/// versioned against it.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/config.schema.json");

/// A rejected configuration: a JSON-pointer-style path to the offending
/// field plus a human-readable statement of the violated constraint.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    fn new(pointer: &str, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.pointer, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Which map the experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    /// The hyperbolic toral automorphism with matrix `[[2,1],[1,1]]`.
    Cat2,
    /// The diagonal map with rates `(4, 2, 1/8)` on `R^3`.
    Diag3,
    /// Time reversal of `diag3` (rates `(1/4, 1/2, 8)`).
    Diag3Inverse,
    /// The canonical nonuniform skew product: a two-state expanding fiber
    /// with mean rate `1.1` over a contracting fiber with rate `-1`.
    SkewNonuniform { window: usize },
    /// A custom block-diagonal cocycle over the doubling map.
    Skew {
        window: usize,
        blocks: Vec<hyptime_core::phase::FiberBlock>,
    },
}

impl SystemSpec {
    /// Phase-space dimension of the configured system.
    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Cat2 => 2,
            SystemSpec::Diag3 | SystemSpec::Diag3Inverse => 3,
            SystemSpec::SkewNonuniform { .. } => 3,
            SystemSpec::Skew { blocks, .. } => {
                1 + blocks.iter().map(|b| b.dim).sum::<usize>()
            }
        }
    }

    /// Clock half-window for skew systems, `None` otherwise.
    pub fn window(&self) -> Option<usize> {
        match self {
            SystemSpec::SkewNonuniform { window } | SystemSpec::Skew { window, .. } => {
                Some(*window)
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Cat2 => "cat2",
            SystemSpec::Diag3 => "diag3",
            SystemSpec::Diag3Inverse => "diag3-inverse",
            SystemSpec::SkewNonuniform { .. } => "skew-nonuniform",
            SystemSpec::Skew { .. } => "skew",
        }
    }
}

/// Orbit window lengths: `forward` is the analysis horizon `N`, `backward`
/// the extra past window `B`. Settled splittings extend both internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub forward: u64,
    #[serde(default)]
    pub backward: u64,
}

/// How the tangent splitting along the orbit is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplittingSpec {
    /// Power-iteration estimate, discarding `settle` steps at each end of
    /// the orbit window.
    Settled {
        dims: hyptime_core::bundle::SplitDims,
        settle: usize,
    },
    /// Constant coordinate-axis bundles, listed by coordinate index.
    Axes {
        e: Vec<usize>,
        f: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<usize>>,
    },
    /// Closed-form eigendirections of the torus map (`cat2` only).
    AnalyticTorus,
}

impl SplittingSpec {
    /// Settle steps the orbit window must be padded by (zero for constant
    /// splittings).
    pub fn settle(&self) -> u64 {
        match self {
            SplittingSpec::Settled { settle, .. } => *settle as u64,
            _ => 0,
        }
    }

    /// The same three-bundle splitting named for the time-reversed system:
    /// the bundle order flips so the strongest expanding bundle of the
    /// reversed dynamics comes first. `None` for two-bundle splittings.
    pub fn reversed(&self) -> Option<SplittingSpec> {
        match self {
            SplittingSpec::Settled { dims, settle } => dims.g.map(|g| SplittingSpec::Settled {
                dims: hyptime_core::bundle::SplitDims::three(g, dims.f, dims.e),
                settle: *settle,
            }),
            SplittingSpec::Axes { e, f, g } => g.as_ref().map(|g| SplittingSpec::Axes {
                e: g.clone(),
                f: f.clone(),
                g: Some(e.clone()),
            }),
            SplittingSpec::AnalyticTorus => None,
        }
    }
}

/// Which Pesin-style block a measure sweep estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    /// Contraction-only block `H_ell(gamma2)`.
    H,
    /// Two-sided block `Lambda_ell(gamma1, gamma2)`.
    Lambda,
    /// High-density joint-selection block at density threshold `theta`.
    HighDensity,
}

impl BlockKind {
    pub fn label(&self) -> &'static str {
        match self {
            BlockKind::H => "h-block",
            BlockKind::Lambda => "lambda-block",
            BlockKind::HighDensity => "high-density-block",
        }
    }
}

fn default_ell() -> usize {
    1
}

/// Single-orbit time-selection analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSpec {
    /// Hyperbolic-time threshold on the `E` trace (per-step log units).
    pub log_lambda1: f64,
    /// Averaged-domination threshold on the ratio trace.
    pub log_lambda2: f64,
    #[serde(default = "default_ell")]
    pub ell: usize,
}

/// Single-orbit block-membership analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Density threshold for the high-density joint selection.
    pub theta: f64,
    #[serde(default = "default_ell")]
    pub ell: usize,
}

/// Local-manifold growth along one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowSpec {
    pub params: GrowerParams,
    pub log_lambda1: f64,
    pub log_lambda2: f64,
    #[serde(default = "default_ell")]
    pub ell: usize,
    /// Probe-calibrate the cone width and cut radius before growing.
    #[serde(default)]
    pub calibrate: bool,
    /// Backward depth for post-growth certificate verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_depth: Option<u64>,
}

/// Which side of the splitting a nested growth certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldSide {
    Unstable,
    Stable,
}

/// Nested local manifolds (line inside plane) along one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSpec {
    pub params: GrowerParams,
    #[serde(default = "default_side")]
    pub side: ManifoldSide,
}

fn default_side() -> ManifoldSide {
    ManifoldSide::Unstable
}

/// Monte Carlo estimate of block measures across block lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSweepSpec {
    pub block: BlockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    pub gamma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Block lengths to sweep, strictly increasing.
    pub ells: Vec<usize>,
    pub samples: u64,
}

/// Synthetic-input generation: sequences, cocycles, and the Pliss
/// threshold calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<CocycleSpec>,
}

/// Inputs to the Pliss-frequency calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub bound_l: f64,
    pub eta: f64,
    pub zeta: f64,
    pub theta: f64,
    pub length: usize,
}

/// The analysis an experiment runs; absent means "manifest only".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnalysisSpec {
    Times(TimesSpec),
    Blocks(BlocksSpec),
    Grow(GrowSpec),
    Nested(NestedSpec),
    MeasureSweep(MeasureSweepSpec),
    Synth(SynthSpec),
}

impl AnalysisSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisSpec::Times(_) => "times",
            AnalysisSpec::Blocks(_) => "blocks",
            AnalysisSpec::Grow(_) => "grow",
            AnalysisSpec::Nested(_) => "nested",
            AnalysisSpec::MeasureSweep(_) => "measure-sweep",
            AnalysisSpec::Synth(_) => "synth",
        }
    }

    /// Whether the analysis consumes an orbit of the configured system.
    pub fn needs_orbit(&self) -> bool {
        !matches!(self, AnalysisSpec::Synth(_))
    }

    /// Whether the analysis consumes a tangent splitting.
    pub fn needs_splitting(&self) -> bool {
        !matches!(self, AnalysisSpec::Synth(_))
    }
}

/// Comparison operator of a declared expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareOp {
    Eq,
    Ge,
    Le,
    Gt,
    Lt,
    /// `|actual - value| <= tol`.
    Within,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ge => ">=",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Within => "~",
        }
    }
}

/// A declared expectation on one reported metric; the run exits nonzero
/// when any expectation fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: String,
    pub op: CompareOp,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl Expectation {
    /// Evaluate against a reported value.
    pub fn holds(&self, actual: f64) -> bool {
        match self.op {
            CompareOp::Eq => actual == self.value,
            CompareOp::Ge => actual >= self.value,
            CompareOp::Le => actual <= self.value,
            CompareOp::Gt => actual > self.value,
            CompareOp::Lt => actual < self.value,
            CompareOp::Within => (actual - self.value).abs() <= self.tol.unwrap_or(0.0),
        }
    }
}

/// A complete experiment request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSpec>,
    /// Start coordinates: full coordinates for `cat2`/`diag3`, fiber
    /// coordinates (clock excluded) for skew systems. Absent means the
    /// canonical start: the fixed point for `cat2`/`diag3`, clock zero
    /// with zero fiber for skew products.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
}

impl ExperimentConfig {
    /// Parse and validate a JSON config file.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("/", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Parse and validate a JSON config string.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::new("/", format!("invalid config JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Check every constraint the analyses rely on, reporting the first
    /// violation with a pointer to the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_system()?;
        if let Some(start) = &self.start {
            let expected = match &self.system {
                SystemSpec::Cat2 | SystemSpec::Diag3 | SystemSpec::Diag3Inverse => {
                    self.system.dim()
                }
                // Skew starts give fiber coordinates; the clock is always 0.
                _ => self.system.dim() - 1,
            };
            if start.len() != expected {
                return Err(ConfigError::new(
                    "/start",
                    format!("expected {expected} coordinates, got {}", start.len()),
                ));
            }
            if start.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new("/start", "coordinates must be finite"));
            }
        }
        if let Some(split) = &self.splitting {
            self.validate_splitting(split)?;
        }
        let analysis = match &self.analysis {
            None => {
                // Manifest-only runs report no metrics, so declared
                // expectations could never be checked.
                if !self.expectations.is_empty() {
                    return Err(ConfigError::new(
                        "/expectations",
                        "expectations require an analysis to report metrics",
                    ));
                }
                return Ok(());
            }
            Some(a) => a,
        };
        if analysis.needs_orbit() {
            let orbit = self.orbit.as_ref().ok_or_else(|| {
                ConfigError::new(
                    "/orbit",
                    format!("the {} analysis requires an orbit window", analysis.kind()),
                )
            })?;
            if orbit.forward == 0 {
                return Err(ConfigError::new(
                    "/orbit/forward",
                    "horizon must be at least 1",
                ));
            }
            self.validate_window_budget(orbit, analysis)?;
        }
        if analysis.needs_splitting() && self.splitting.is_none() {
            return Err(ConfigError::new(
                "/splitting",
                format!("the {} analysis requires a splitting", analysis.kind()),
            ));
        }
        match analysis {
            AnalysisSpec::Times(spec) => self.validate_times(spec)?,
            AnalysisSpec::Blocks(spec) => self.validate_blocks(spec)?,
            AnalysisSpec::Grow(spec) => self.validate_grow(spec)?,
            AnalysisSpec::Nested(spec) => self.validate_nested(spec)?,
            AnalysisSpec::MeasureSweep(spec) => self.validate_sweep(spec)?,
            AnalysisSpec::Synth(spec) => self.validate_synth(spec)?,
        }
        self.validate_expectations()
    }

    fn validate_system(&self) -> Result<(), ConfigError> {
        match &self.system {
            SystemSpec::SkewNonuniform { window } => {
                if *window == 0 {
                    return Err(ConfigError::new(
                        "/system/window",
                        "clock window must be positive",
                    ));
                }
            }
            SystemSpec::Skew { window, blocks } => {
                if *window == 0 {
                    return Err(ConfigError::new(
                        "/system/window",
                        "clock window must be positive",
                    ));
                }
                if blocks.is_empty() {
                    return Err(ConfigError::new(
                        "/system/blocks",
                        "at least one fiber block required",
                    ));
                }
                for (i, b) in blocks.iter().enumerate() {
                    if b.dim == 0 || b.dim > hyptime_core::phase::MAX_BLOCK_DIM {
                        return Err(ConfigError::new(
                            &format!("/system/blocks/{i}/dim"),
                            format!(
                                "block dimension must be 1..={}, got {}",
                                hyptime_core::phase::MAX_BLOCK_DIM,
                                b.dim
                            ),
                        ));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_splitting(&self, split: &SplittingSpec) -> Result<(), ConfigError> {
        let dim = self.system.dim();
        match split {
            SplittingSpec::Settled { dims, settle } => {
                if dims.e == 0 || dims.f == 0 || dims.g == Some(0) {
                    return Err(ConfigError::new(
                        "/splitting/dims",
                        "every bundle must have positive dimension",
                    ));
                }
                if dims.total() != dim {
                    return Err(ConfigError::new(
                        "/splitting/dims",
                        format!(
                            "bundle dimensions sum to {}, but the system has dimension {dim}",
                            dims.total()
                        ),
                    ));
                }
                if *settle == 0 {
                    return Err(ConfigError::new(
                        "/splitting/settle",
                        "settle margin must be at least 1",
                    ));
                }
            }
            SplittingSpec::Axes { e, f, g } => {
                let mut seen = vec![false; dim];
                let groups: [(&str, &Vec<usize>); 2] = [("e", e), ("f", f)];
                let mut all: Vec<(&str, &Vec<usize>)> = groups.to_vec();
                if let Some(g) = g {
                    all.push(("g", g));
                }
                let mut total = 0usize;
                for (name, axes) in &all {
                    if axes.is_empty() {
                        return Err(ConfigError::new(
                            &format!("/splitting/{name}"),
                            "axis list must be nonempty",
                        ));
                    }
                    for &i in axes.iter() {
                        if i >= dim {
                            return Err(ConfigError::new(
                                &format!("/splitting/{name}"),
                                format!("axis index {i} outside 0..{dim}"),
                            ));
                        }
                        if seen[i] {
                            return Err(ConfigError::new(
                                &format!("/splitting/{name}"),
                                format!("axis index {i} assigned to two bundles"),
                            ));
                        }
                        seen[i] = true;
                    }
                    total += axes.len();
                }
                if total != dim {
                    return Err(ConfigError::new(
                        "/splitting",
                        format!("axis bundles cover {total} of {dim} coordinates"),
                    ));
                }
            }
            SplittingSpec::AnalyticTorus => {
                if !matches!(self.system, SystemSpec::Cat2) {
                    return Err(ConfigError::new(
                        "/splitting/mode",
                        "analytic-torus splitting is defined for the cat2 system only",
                    ));
                }
            }
        }
        Ok(())
    }

    /// For skew systems the clock window must fit the requested orbit plus
    /// whatever slack the analysis consumes beyond the horizon.
    fn validate_window_budget(
        &self,
        orbit: &OrbitSpec,
        analysis: &AnalysisSpec,
    ) -> Result<(), ConfigError> {
        let window = match self.system.window() {
            Some(w) => w as u64,
            None => return Ok(()),
        };
        let settle = match &self.splitting {
            Some(SplittingSpec::Settled { settle, .. }) => *settle as u64,
            _ => 0,
        };
        let mut forward_need = orbit.forward + settle;
        let mut backward_need = orbit.backward.max(settle);
        if let AnalysisSpec::Grow(spec) = analysis {
            // Pushes may run to the step budget; the certificate iterates
            // backward from the final cut.
            forward_need = forward_need.max(spec.params.n_max);
            backward_need = backward_need.max(hyptime_core::grower::F2_DEPTH_CAP);
        }
        if let AnalysisSpec::Nested(spec) = analysis {
            forward_need = forward_need.max(spec.params.n_max);
            backward_need = backward_need.max(hyptime_core::grower::F2_DEPTH_CAP);
        }
        if window < forward_need || window < backward_need {
            return Err(ConfigError::new(
                "/system/window",
                format!(
                    "clock window {window} too small: the run needs {forward_need} forward \
                     and {backward_need} backward steps"
                ),
            ));
        }
        Ok(())
    }

    /// `ell`-block analyses need at least one complete block inside the
    /// horizon.
    fn validate_ell_fits(&self, ell: usize) -> Result<(), ConfigError> {
        if ell == 0 {
            return Err(ConfigError::new("/analysis/ell", "block length must be >= 1"));
        }
        if let Some(orbit) = &self.orbit {
            if ell as u64 > orbit.forward {
                return Err(ConfigError::new(
                    "/analysis/ell",
                    format!(
                        "block length {ell} exceeds the horizon {}",
                        orbit.forward
                    ),
                ));
            }
        }
        Ok(())
    }

    fn validate_times(&self, spec: &TimesSpec) -> Result<(), ConfigError> {
        for (name, v) in [
            ("log_lambda1", spec.log_lambda1),
            ("log_lambda2", spec.log_lambda2),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::new(
                    &format!("/analysis/{name}"),
                    "threshold must be finite",
                ));
            }
        }
        self.validate_ell_fits(spec.ell)
    }

    fn validate_blocks(&self, spec: &BlocksSpec) -> Result<(), ConfigError> {
        if !spec.gamma1.is_finite() || !spec.gamma2.is_finite() {
            return Err(ConfigError::new("/analysis", "thresholds must be finite"));
        }
        if !(spec.gamma1 > spec.gamma2) {
            return Err(ConfigError::new(
                "/analysis/gamma1",
                format!(
                    "block thresholds must satisfy gamma1 > gamma2, got gamma1 = {} <= gamma2 = {}",
                    spec.gamma1, spec.gamma2
                ),
            ));
        }
        if !(spec.theta > 0.0 && spec.theta < 1.0) {
            return Err(ConfigError::new(
                "/analysis/theta",
                format!("density threshold {} outside (0, 1)", spec.theta),
            ));
        }
        self.validate_ell_fits(spec.ell)
    }

    fn validate_grow(&self, spec: &GrowSpec) -> Result<(), ConfigError> {
        spec.params
            .validate()
            .map_err(|e| ConfigError::new("/analysis/params", e.to_string()))?;
        if !spec.log_lambda1.is_finite() || !spec.log_lambda2.is_finite() {
            return Err(ConfigError::new("/analysis", "thresholds must be finite"));
        }
        if spec.calibrate && !(spec.params.sigma1.ln() < spec.log_lambda1) {
            // Probe calibration needs slack between the certified rate and
            // the hyperbolic-time threshold.
            return Err(ConfigError::new(
                "/analysis/params/sigma1",
                format!(
                    "calibration requires ln(sigma1) < log_lambda1, got ln({}) = {} >= {}",
                    spec.params.sigma1,
                    spec.params.sigma1.ln(),
                    spec.log_lambda1
                ),
            ));
        }
        self.validate_ell_fits(spec.ell)
    }

    fn validate_nested(&self, spec: &NestedSpec) -> Result<(), ConfigError> {
        spec.params
            .validate()
            .map_err(|e| ConfigError::new("/analysis/params", e.to_string()))?;
        let has_three = match &self.splitting {
            Some(SplittingSpec::Settled { dims, .. }) => dims.g.is_some(),
            Some(SplittingSpec::Axes { g, .. }) => g.is_some(),
            Some(SplittingSpec::AnalyticTorus) | None => false,
        };
        if !has_three {
            return Err(ConfigError::new(
                "/splitting",
                "nested growth requires a three-bundle splitting",
            ));
        }
        Ok(())
    }

    fn validate_sweep(&self, spec: &MeasureSweepSpec) -> Result<(), ConfigError> {
        if !spec.gamma2.is_finite() {
            return Err(ConfigError::new("/analysis/gamma2", "threshold must be finite"));
        }
        match spec.block {
            BlockKind::H => {}
            BlockKind::Lambda | BlockKind::HighDensity => {
                let gamma1 = spec.gamma1.ok_or_else(|| {
                    ConfigError::new(
                        "/analysis/gamma1",
                        format!("the {} estimate requires gamma1", spec.block.label()),
                    )
                })?;
                if !gamma1.is_finite() {
                    return Err(ConfigError::new(
                        "/analysis/gamma1",
                        "threshold must be finite",
                    ));
                }
                if !(gamma1 > spec.gamma2) {
                    return Err(ConfigError::new(
                        "/analysis/gamma1",
                        format!(
                            "block thresholds must satisfy gamma1 > gamma2, \
                             got gamma1 = {gamma1} <= gamma2 = {}",
                            spec.gamma2
                        ),
                    ));
                }
            }
        }
        if spec.block == BlockKind::HighDensity {
            let theta = spec.theta.ok_or_else(|| {
                ConfigError::new(
                    "/analysis/theta",
                    "the high-density estimate requires a density threshold",
                )
            })?;
            if !(theta > 0.0 && theta < 1.0) {
                return Err(ConfigError::new(
                    "/analysis/theta",
                    format!("density threshold {theta} outside (0, 1)"),
                ));
            }
        }
        if spec.ells.is_empty() {
            return Err(ConfigError::new(
                "/analysis/ells",
                "at least one block length required",
            ));
        }
        for pair in spec.ells.windows(2) {
            if pair[0] >= pair[1] {
                return Err(ConfigError::new(
                    "/analysis/ells",
                    format!(
                        "block lengths must be strictly increasing, got {} before {}",
                        pair[0], pair[1]
                    ),
                ));
            }
        }
        if spec.ells[0] == 0 {
            return Err(ConfigError::new(
                "/analysis/ells",
                "block lengths must be >= 1",
            ));
        }
        if let (Some(orbit), Some(&largest)) = (&self.orbit, spec.ells.last()) {
            if largest as u64 > orbit.forward {
                return Err(ConfigError::new(
                    "/analysis/ells",
                    format!(
                        "block length {largest} exceeds the horizon {}",
                        orbit.forward
                    ),
                ));
            }
        }
        if spec.samples == 0 {
            return Err(ConfigError::new(
                "/analysis/samples",
                "at least one sample required",
            ));
        }
        Ok(())
    }

    fn validate_synth(&self, spec: &SynthSpec) -> Result<(), ConfigError> {
        if spec.sequence.is_none() && spec.calibration.is_none() && spec.cocycle.is_none() {
            return Err(ConfigError::new(
                "/analysis",
                "synth requires at least one of: sequence, calibration, cocycle",
            ));
        }
        if let Some(c) = &spec.calibration {
            if !(c.eta < c.zeta && c.zeta < c.bound_l) {
                return Err(ConfigError::new(
                    "/analysis/calibration",
                    format!(
                        "calibration thresholds must satisfy eta < zeta < bound_l, \
                         got eta = {}, zeta = {}, bound_l = {}",
                        c.eta, c.zeta, c.bound_l
                    ),
                ));
            }
            if !(c.theta > 0.0 && c.theta < 1.0) {
                return Err(ConfigError::new(
                    "/analysis/calibration/theta",
                    format!("selection fraction {} outside (0, 1)", c.theta),
                ));
            }
            if c.length == 0 {
                return Err(ConfigError::new(
                    "/analysis/calibration/length",
                    "sequence length must be >= 1",
                ));
            }
        }
        Ok(())
    }

    fn validate_expectations(&self) -> Result<(), ConfigError> {
        for (i, e) in self.expectations.iter().enumerate() {
            if e.metric.is_empty() {
                return Err(ConfigError::new(
                    &format!("/expectations/{i}/metric"),
                    "metric name must be nonempty",
                ));
            }
            if !e.value.is_finite() {
                return Err(ConfigError::new(
                    &format!("/expectations/{i}/value"),
                    "expected value must be finite",
                ));
            }
            match e.op {
                CompareOp::Within => {
                    let tol = e.tol.ok_or_else(|| {
                        ConfigError::new(
                            &format!("/expectations/{i}/tol"),
                            "the within operator requires a tolerance",
                        )
                    })?;
                    if !(tol >= 0.0) {
                        return Err(ConfigError::new(
                            &format!("/expectations/{i}/tol"),
                            "tolerance must be nonnegative",
                        ));
                    }
                }
                _ => {
                    if e.tol.is_some() {
                        return Err(ConfigError::new(
                            &format!("/expectations/{i}/tol"),
                            "tolerance only applies to the within operator",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_times_config() -> serde_json::Value {
        serde_json::json!({
            "system": {"kind": "cat2"},
            "orbit": {"forward": 100},
            "splitting": {"mode": "settled", "dims": {"e": 1, "f": 1}, "settle": 30},
            "analysis": {"kind": "times", "log_lambda1": 0.9, "log_lambda2": 1.9},
            "seed": 7
        })
    }

    #[test]
    fn a_minimal_config_roundtrips_through_serde() {
        let text = minimal_times_config().to_string();
        let config = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(config.system, SystemSpec::Cat2);
        assert_eq!(config.orbit.unwrap().forward, 100);
        let echoed = serde_json::to_string(&config).unwrap();
        let reparsed = ExperimentConfig::from_json(&echoed).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = minimal_times_config();
        v["surprise"] = serde_json::json!(1);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.message.contains("surprise"), "{err}");
    }

    #[test]
    fn misordered_block_thresholds_point_at_gamma1() {
        let mut v = minimal_times_config();
        v["analysis"] = serde_json::json!({
            "kind": "blocks", "gamma1": -0.5, "gamma2": 0.5, "theta": 0.5
        });
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/analysis/gamma1");
        assert!(err.message.contains("gamma1 > gamma2"), "{err}");
    }

    #[test]
    fn equal_block_thresholds_are_also_rejected() {
        let mut v = minimal_times_config();
        v["analysis"] = serde_json::json!({
            "kind": "blocks", "gamma1": 0.5, "gamma2": 0.5, "theta": 0.5
        });
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/analysis/gamma1");
    }

    #[test]
    fn axis_splittings_must_partition_the_coordinates() {
        let mut v = minimal_times_config();
        v["system"] = serde_json::json!({"kind": "diag3"});
        v["splitting"] = serde_json::json!({"mode": "axes", "e": [0], "f": [0]});
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.message.contains("two bundles"), "{err}");

        v["splitting"] = serde_json::json!({"mode": "axes", "e": [0], "f": [1]});
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.message.contains("cover 2 of 3"), "{err}");
    }

    #[test]
    fn analytic_splitting_is_torus_only() {
        let mut v = minimal_times_config();
        v["system"] = serde_json::json!({"kind": "diag3"});
        v["splitting"] = serde_json::json!({"mode": "analytic-torus"});
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/splitting/mode");
    }

    #[test]
    fn skew_windows_must_fit_the_requested_orbit() {
        let mut v = minimal_times_config();
        v["system"] = serde_json::json!({"kind": "skew-nonuniform", "window": 50});
        v["splitting"] =
            serde_json::json!({"mode": "axes", "e": [1], "f": [2], "g": [0]});
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/system/window");
        assert!(err.message.contains("too small"), "{err}");
    }

    #[test]
    fn manifest_only_configs_need_no_orbit_or_splitting() {
        let v = serde_json::json!({"system": {"kind": "cat2"}, "seed": 3});
        let config = ExperimentConfig::from_json(&v.to_string()).unwrap();
        assert!(config.analysis.is_none());
    }

    #[test]
    fn sweeps_demand_increasing_block_lengths_and_matching_thresholds() {
        let mut v = minimal_times_config();
        v["analysis"] = serde_json::json!({
            "kind": "measure-sweep", "block": "lambda", "gamma1": 0.9,
            "gamma2": -0.9, "ells": [4, 2], "samples": 10
        });
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/analysis/ells");

        v["analysis"] = serde_json::json!({
            "kind": "measure-sweep", "block": "high-density", "gamma1": 0.9,
            "gamma2": -0.9, "ells": [2], "samples": 10
        });
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/analysis/theta");
    }

    #[test]
    fn within_expectations_require_a_tolerance() {
        let mut v = minimal_times_config();
        v["expectations"] = serde_json::json!([
            {"metric": "density.lower", "op": "within", "value": 1.0}
        ]);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.pointer, "/expectations/0/tol");
    }

    #[test]
    fn the_shipped_schema_is_valid_json_and_names_every_config_field() {
        let schema: serde_json::Value = serde_json::from_str(CONFIG_SCHEMA).unwrap();
        let props = schema["properties"].as_object().unwrap();
        for field in [
            "system",
            "orbit",
            "start",
            "splitting",
            "analysis",
            "seed",
            "out_dir",
            "expectations",
        ] {
            assert!(props.contains_key(field), "schema missing field {field}");
        }
        assert_eq!(schema["additionalProperties"], serde_json::json!(false));
    }
}
