//! Finite-orbit hyperbolicity analytics without a domination assumption.
//!
//! The crate computes, along concrete orbits of an invertible system:
//!
//! * per-step and per-block expansion logs of a tangent splitting
//!   ([`times::step_logs`]),
//! * hyperbolic times, averaged-domination prefixes, and their
//!   intersection ([`times`]),
//! * Pesin-style block memberships and density statistics ([`times`]),
//! * settled estimates of invariant splittings and finite-window Lyapunov
//!   exponents ([`bundle`]),
//! * and certified local unstable/stable manifolds grown by pushing disks
//!   and cutting at hyperbolic times ([`grower`]).
//!
//! [`synthlab`] supplies seeded sequence and cocycle generators together
//! with brute-force evaluators of the defining inequalities, used as
//! oracles by the test suites.

pub mod bundle;
pub mod error;
pub mod grower;
pub mod linalg;
pub mod phase;
pub mod rng;
pub mod synthlab;
pub mod times;

pub use bundle::{LyapunovEstimate, SplittingField, Subspace};
pub use error::{Error, Result};
pub use grower::{DiskMesh, GrowerParams, LocalManifold};
pub use phase::{chart_distance, make_orbit, OrbitSegment, Point, SmoothSystem, Space};
pub use times::{BlockVerdict, DensityStats, StepLogSequence, TimeSet};
