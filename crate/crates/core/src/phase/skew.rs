//! Windowed skew products over the doubling map.
//!
//! The base dynamics is the doubling map `b -> 2b (mod 1)`, realized on a
//! stored window of its symbolic itinerary: a seeded random bit sequence
//! `s_j` determines `b(tau) = 0.s_tau s_{tau+1} ...` (53 bits), so shifting
//! the clock by one step doubles `b` exactly in symbol space. Because the
//! bit window is two-sided, the base has an exact inverse along the window:
//! the branch choices backward are part of the stored itinerary.
//!
//! A point is `(clock, v)` with an integer-valued clock coordinate followed
//! by the fiber coordinates. The fiber map is block diagonal: each block is
//! scaled by `exp(rate)` where the per-block rate is a function of the
//! current base coordinate. The tangent map is therefore
//! `diag(1, exp(r_1) I, ..., exp(r_m) I)`, a cocycle over the doubling map
//! with invariant coordinate blocks; the clock direction is a neutral
//! (exponent-zero) bundle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::builtins::expect_dim;
use super::{Point, SmoothSystem, Space, SystemMetadata};
use crate::error::{Error, Result};
use crate::rng;

/// Largest fiber-block dimension supported.
pub const MAX_BLOCK_DIM: usize = 3;

/// How a block's log-expansion rate depends on the base coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateProcess {
    /// The same rate at every step.
    Constant { value: f64 },
    /// `hi` when the base coordinate is below `p_hi`, else `lo`. Under the
    /// uniform base measure the rate is `hi` with probability `p_hi`.
    TwoState { hi: f64, lo: f64, p_hi: f64 },
    /// Smooth profile `mean + amplitude * cos(2 pi b)`; averages to `mean`.
    Oscillation { mean: f64, amplitude: f64 },
}

impl RateProcess {
    /// The rate produced at base coordinate `b`.
    fn rate(&self, b: f64) -> f64 {
        match *self {
            RateProcess::Constant { value } => value,
            RateProcess::TwoState { hi, lo, p_hi } => {
                if b < p_hi {
                    hi
                } else {
                    lo
                }
            }
            RateProcess::Oscillation { mean, amplitude } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * b).cos()
            }
        }
    }

    /// Mean rate under the uniform base measure.
    pub fn mean_rate(&self) -> f64 {
        match *self {
            RateProcess::Constant { value } => value,
            RateProcess::TwoState { hi, lo, p_hi } => p_hi * hi + (1.0 - p_hi) * lo,
            RateProcess::Oscillation { mean, .. } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite {
                    what: what.to_string(),
                    value: v,
                })
            }
        };
        match *self {
            RateProcess::Constant { value } => finite(value, "constant rate"),
            RateProcess::TwoState { hi, lo, p_hi } => {
                finite(hi, "two-state hi")?;
                finite(lo, "two-state lo")?;
                if !(0.0..=1.0).contains(&p_hi) {
                    return Err(Error::InvalidSpec {
                        reason: format!("two-state probability {p_hi} outside [0,1]"),
                    });
                }
                Ok(())
            }
            RateProcess::Oscillation { mean, amplitude } => {
                finite(mean, "oscillation mean")?;
                finite(amplitude, "oscillation amplitude")
            }
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("rate process serializes")
    }
}

/// One fiber block: a dimension (1..=3) and its rate process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberBlock {
    pub dim: usize,
    pub process: RateProcess,
}

/// A block-diagonal cocycle over the doubling map, stored on a finite clock
/// window `[-window, window]`.
pub struct SkewSystem {
    blocks: Vec<FiberBlock>,
    bits: Vec<u64>,
    window: i64,
    seed: u64,
    dim: usize,
}

impl SkewSystem {
    /// Build a skew system with the given fiber blocks, clock half-window,
    /// and seed for the base itinerary.
    pub fn new(blocks: Vec<FiberBlock>, window: usize, seed: u64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSpec {
                reason: "at least one fiber block required".to_string(),
            });
        }
        for b in &blocks {
            if b.dim == 0 || b.dim > MAX_BLOCK_DIM {
                return Err(Error::InvalidSpec {
                    reason: format!("block dimension {} outside 1..={MAX_BLOCK_DIM}", b.dim),
                });
            }
            b.process.validate()?;
        }
        if window == 0 {
            return Err(Error::InvalidSpec {
                reason: "clock window must be positive".to_string(),
            });
        }
        let window = window as i64;
        // Bits for clocks in [-window, window], plus the 64-bit lookahead
        // that the 53-bit base coordinate of the last clock needs.
        let n_bits = (2 * window + 65) as usize;
        let n_words = n_bits.div_ceil(64);
        let mut r = rng::stream(seed, "doubling-bits", 0);
        let bits = (0..n_words).map(|_| r.random::<u64>()).collect();
        let fiber_dim: usize = blocks.iter().map(|b| b.dim).sum();
        Ok(Self {
            blocks,
            bits,
            window,
            seed,
            dim: 1 + fiber_dim,
        })
    }

    /// Clock range on which the base coordinate (hence rates and tangents)
    /// is defined.
    pub fn clock_range(&self) -> (i64, i64) {
        (-self.window, self.window)
    }

    pub fn blocks(&self) -> &[FiberBlock] {
        &self.blocks
    }

    /// Coordinate indices (into a point) covered by fiber block `i`.
    pub fn block_columns(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = 1 + self.blocks[..i].iter().map(|b| b.dim).sum::<usize>();
        start..start + self.blocks[i].dim
    }

    fn bit(&self, j: i64) -> u64 {
        let idx = (j + self.window) as usize;
        (self.bits[idx / 64] >> (idx % 64)) & 1
    }

    /// The base coordinate at clock `tau`: the dyadic number whose binary
    /// digits are the stored bits from `tau` on (53 of them).
    pub fn base_coordinate(&self, tau: i64) -> Result<f64> {
        let (lo, hi) = self.clock_range();
        if tau < lo || tau > hi {
            return Err(Error::BaseWindowExhausted { clock: tau, lo, hi });
        }
        let mut m: u64 = 0;
        for i in 0..53 {
            m = (m << 1) | self.bit(tau + i);
        }
        Ok(m as f64 / (1u64 << 53) as f64)
    }

    /// The log-rate of block `i` at clock `tau`.
    pub fn rate_at(&self, block: usize, tau: i64) -> Result<f64> {
        let b = self.base_coordinate(tau)?;
        Ok(self.blocks[block].process.rate(b))
    }

    /// Mean log-rate per block under the uniform base measure.
    pub fn mean_rates(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.process.mean_rate()).collect()
    }

    /// Read and validate the integer clock of a point.
    pub fn clock_of(&self, x: &Point) -> Result<i64> {
        expect_dim(x, self.dim)?;
        let c = x.coords()[0];
        let rounded = c.round();
        if (c - rounded).abs() > 1e-6 {
            return Err(Error::NonFinite {
                what: "non-integral clock coordinate".to_string(),
                value: c,
            });
        }
        Ok(rounded as i64)
    }

    /// A point at clock `tau` with the given fiber coordinates.
    pub fn point_at(&self, tau: i64, fiber: &[f64]) -> Result<Point> {
        if fiber.len() + 1 != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim - 1,
                got: fiber.len(),
            });
        }
        let mut coords = Vec::with_capacity(self.dim);
        coords.push(tau as f64);
        coords.extend_from_slice(fiber);
        Point::from_slice(self.space(), &coords)
    }

    fn scale_fiber(&self, x: &Point, tau_for_rates: i64, new_clock: i64, sign: f64) -> Result<Point> {
        let b = self.base_coordinate(tau_for_rates)?;
        let mut coords = x.coords().clone();
        coords[0] = new_clock as f64;
        for (i, block) in self.blocks.iter().enumerate() {
            let factor = (sign * block.process.rate(b)).exp();
            for c in self.block_columns(i) {
                coords[c] *= factor;
            }
        }
        Point::new(self.space(), coords)
    }
}

impl SmoothSystem for SkewSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn space(&self) -> Space {
        Space::Euclidean(self.dim)
    }

    fn metadata(&self) -> SystemMetadata {
        SystemMetadata {
            name: "skew".to_string(),
            params: json!({
                "seed": self.seed,
                "window": self.window,
                "blocks": self.blocks.iter()
                    .map(|b| json!({ "dim": b.dim, "process": b.process.describe() }))
                    .collect::<Vec<_>>(),
            }),
        }
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        let tau = self.clock_of(x)?;
        let (lo, hi) = self.clock_range();
        if tau + 1 > hi {
            return Err(Error::BaseWindowExhausted { clock: tau + 1, lo, hi });
        }
        self.scale_fiber(x, tau, tau + 1, 1.0)
    }

    fn backward(&self, x: &Point) -> Result<Point> {
        let tau = self.clock_of(x)?;
        let (lo, hi) = self.clock_range();
        if tau - 1 < lo {
            return Err(Error::BaseWindowExhausted { clock: tau - 1, lo, hi });
        }
        self.scale_fiber(x, tau - 1, tau - 1, -1.0)
    }

    fn tangent(&self, x: &Point) -> Result<DMatrix<f64>> {
        let tau = self.clock_of(x)?;
        let b = self.base_coordinate(tau)?;
        let mut diag = DVector::zeros(self.dim);
        diag[0] = 1.0;
        for (i, block) in self.blocks.iter().enumerate() {
            let factor = block.process.rate(b).exp();
            for c in self.block_columns(i) {
                diag[c] = factor;
            }
        }
        Ok(DMatrix::from_diagonal(&diag))
    }

    fn tangent_backward(&self, x: &Point) -> Result<DMatrix<f64>> {
        let tau = self.clock_of(x)?;
        let b = self.base_coordinate(tau - 1)?;
        let mut diag = DVector::zeros(self.dim);
        diag[0] = 1.0;
        for (i, block) in self.blocks.iter().enumerate() {
            let factor = (-block.process.rate(b)).exp();
            for c in self.block_columns(i) {
                diag[c] = factor;
            }
        }
        Ok(DMatrix::from_diagonal(&diag))
    }
}

/// The flagship nonuniform example: a genuinely expanding-on-average block
/// that contracts on a fifth of its steps, over a contracting block.
///
/// Block 1 (1-D): two-state rate, `1.5` with probability `0.8` and `-0.5`
/// otherwise, so the mean exponent is `1.1`. Block 2 (1-D): constant `-1.0`.
pub fn skew_nonuniform(window: usize, seed: u64) -> Result<SkewSystem> {
    SkewSystem::new(
        vec![
            FiberBlock {
                dim: 1,
                process: RateProcess::TwoState { hi: 1.5, lo: -0.5, p_hi: 0.8 },
            },
            FiberBlock {
                dim: 1,
                process: RateProcess::Constant { value: -1.0 },
            },
        ],
        window,
        seed,
    )
}
