//! The six analyses an experiment can run.
//!
//! Each submodule exposes `run(context, spec, writer) -> metrics`: it
//! writes its artifacts through the [`crate::report::ReportWriter`] and
//! returns the flat metric table expectations are evaluated against.
//! Boolean outcomes are reported as `0.0` / `1.0`.

pub mod blocks;
pub mod grow;
pub mod measure;
pub mod nested;
pub mod synth;
pub mod times;

/// Report a boolean as a metric value.
pub(crate) fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
