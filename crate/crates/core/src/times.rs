//! Integer-time analytics along one orbit: step-log sequences, hyperbolic
//! times, averaged-domination prefixes, Pliss-style selection, block
//! membership, and density statistics.
//!
//! Everything here reduces to trailing-window or prefix conditions on a real
//! sequence `a_0 .. a_{N-1}`. With shifted prefix sums
//! `U_n = sum_{j<n} (a_j - c)` the trailing-window family
//! "for all 1 <= k <= n: (1/k) sum_{j=n-k}^{n-1} a_j >= c" collapses to the
//! single comparison `U_n >= max_{j<n} U_j`, so each selection runs in O(N)
//! with one running extremum. The brute-force evaluators in `synthlab`
//! re-derive membership from the defining inequalities per `(n, k)` pair and
//! pin these fast paths in the test suites.
//!
//! Inequality senses are deliberate and load-bearing: hyperbolic times and
//! averaged domination use non-strict `>=`, Pliss selection uses strict `<`,
//! and the mirrored selection `t_ell_times` uses non-strict `<=`. Boundary
//! examples in the tests pin each sense.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bundle::{self, SplittingField};
use crate::error::{Error, Result};
use crate::phase::OrbitSegment;

/// Smallest trailing window used by the density estimator.
pub const DENSITY_WINDOW_MIN: usize = 32;

/// What a step-log sequence measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeqKind {
    /// `(1/l) log` of the mini-norm of the `l`-step cocycle restricted to E.
    #[serde(rename = "log-mini-E")]
    LogMiniE,
    /// `(1/l) log` of the norm of the `l`-step cocycle restricted to F.
    #[serde(rename = "log-norm-F")]
    LogNormF,
    /// Their difference (the averaged-domination ratio trace).
    #[serde(rename = "log-ratio")]
    LogRatio,
    /// Externally supplied values.
    #[serde(rename = "custom")]
    Custom,
}

/// A finite real sequence of per-step logarithms along an orbit.
///
/// When `ell > 1` each value is the log over one `ell`-step block divided by
/// `ell`, so thresholds stay in per-step units regardless of block length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLogSequence {
    values: Vec<f64>,
    kind: SeqKind,
    ell: usize,
}

impl StepLogSequence {
    pub fn new(values: Vec<f64>, kind: SeqKind, ell: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySequence);
        }
        if ell == 0 {
            return Err(Error::InvalidSpec {
                reason: "block length ell must be >= 1".to_string(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("step log at index {i}"),
                    value: v,
                });
            }
        }
        Ok(Self { values, kind, ell })
    }

    /// An externally supplied sequence with block length 1.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SeqKind::Custom, 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Elementwise negation (used by the mirrored selection).
    pub fn negated(&self) -> StepLogSequence {
        StepLogSequence {
            values: self.values.iter().map(|v| -v).collect(),
            kind: SeqKind::Custom,
            ell: self.ell,
        }
    }
}

/// Build the step-log sequence of the given kind from an orbit and its
/// splitting: one value per `ell`-step block, starting at orbit index 0.
///
/// The number of blocks is the largest count for which both the Jacobian
/// window and the splitting coverage suffice.
pub fn step_logs(
    orbit: &OrbitSegment,
    split: &SplittingField,
    kind: SeqKind,
    ell: usize,
) -> Result<StepLogSequence> {
    if ell == 0 {
        return Err(Error::InvalidSpec {
            reason: "block length ell must be >= 1".to_string(),
        });
    }
    if kind == SeqKind::Custom {
        return Err(Error::InvalidSpec {
            reason: "custom sequences are constructed directly from values".to_string(),
        });
    }
    let (split_lo, split_hi) = split.range();
    if split_lo > 0 {
        return Err(Error::OrbitWindow {
            index: 0,
            lo: split_lo,
            hi: split_hi,
        });
    }
    // Block i needs the bundle at i*ell and Jacobians for [i*ell, (i+1)*ell).
    let by_orbit = orbit.n_forward() / ell as i64;
    let by_split = split_hi / ell as i64 + 1;
    let count = by_orbit.min(by_split).max(0) as usize;
    if count == 0 {
        return Err(Error::EmptySequence);
    }
    let ell_f = ell as f64;
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let j0 = (i * ell) as i64;
        let v = match kind {
            SeqKind::LogMiniE => {
                bundle::restricted_window_logs(orbit, split.e_at(j0)?, j0, ell)?.0 / ell_f
            }
            SeqKind::LogNormF => {
                bundle::restricted_window_logs(orbit, split.f_at(j0)?, j0, ell)?.1 / ell_f
            }
            SeqKind::LogRatio => {
                let mini_e = bundle::restricted_window_logs(orbit, split.e_at(j0)?, j0, ell)?.0;
                let norm_f = bundle::restricted_window_logs(orbit, split.f_at(j0)?, j0, ell)?.1;
                (mini_e - norm_f) / ell_f
            }
            SeqKind::Custom => unreachable!("rejected above"),
        };
        values.push(v);
    }
    StepLogSequence::new(values, kind, ell)
}

/// A sorted set of selected integer times in `[1, horizon]`, together with
/// the thresholds that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSet {
    times: Vec<u64>,
    horizon: u64,
    params: BTreeMap<String, f64>,
}

impl TimeSet {
    /// Build from raw times; validates sortedness, positivity, and horizon.
    pub fn from_times(
        times: Vec<u64>,
        horizon: u64,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        for pair in times.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidSpec {
                    reason: format!("times not strictly increasing at {} .. {}", pair[0], pair[1]),
                });
            }
        }
        if times.first().is_some_and(|&t| t < 1) || times.last().is_some_and(|&t| t > horizon) {
            return Err(Error::InvalidSpec {
                reason: "times must lie in [1, horizon]".to_string(),
            });
        }
        Ok(Self {
            times,
            horizon,
            params,
        })
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.times.binary_search(&n).is_ok()
    }

    pub fn first(&self) -> Option<u64> {
        self.times.first().copied()
    }

    pub fn last(&self) -> Option<u64> {
        self.times.last().copied()
    }

    /// Intersection, keeping the smaller horizon and merging parameters.
    pub fn intersect(&self, other: &TimeSet) -> TimeSet {
        let times = self
            .times
            .iter()
            .copied()
            .filter(|t| other.contains(*t))
            .collect();
        let mut params = self.params.clone();
        params.extend(other.params.iter().map(|(k, v)| (k.clone(), *v)));
        TimeSet {
            times,
            horizon: self.horizon.min(other.horizon),
            params,
        }
    }
}

/// Shifted prefix sums `U_0 = 0, U_n = sum_{j<n} (a_j - c)`.
fn shifted_prefix_sums(values: &[f64], c: f64) -> Vec<f64> {
    let mut u = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    u.push(acc);
    for &a in values {
        acc += a - c;
        u.push(acc);
    }
    u
}

/// Inequality sense of a trailing-window selection.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    /// All trailing averages `>=` threshold (non-strict).
    AtLeast,
    /// All trailing averages `<` threshold (strict).
    StrictlyBelow,
}

/// O(N) trailing-window selection: `n` qualifies iff every trailing average
/// up to depth `n` clears the threshold in the given sense, which reduces to
/// comparing `U_n` against the running extremum of `U_0 .. U_{n-1}`.
fn select_trailing(values: &[f64], threshold: f64, sense: Sense) -> Vec<u64> {
    let u = shifted_prefix_sums(values, threshold);
    let mut out = Vec::new();
    match sense {
        Sense::AtLeast => {
            let mut run_max = f64::NEG_INFINITY;
            for n in 1..u.len() {
                run_max = run_max.max(u[n - 1]);
                if u[n] >= run_max {
                    out.push(n as u64);
                }
            }
        }
        Sense::StrictlyBelow => {
            let mut run_min = f64::INFINITY;
            for n in 1..u.len() {
                run_min = run_min.min(u[n - 1]);
                if u[n] < run_min {
                    out.push(n as u64);
                }
            }
        }
    }
    out
}

/// Times `n` at which every trailing window of the sequence averages at
/// least `log_lambda1` (non-strict): the hyperbolic times of the orbit at
/// expansion level `lambda_1` when fed the log-mini-E sequence.
pub fn hyperbolic_times(seq: &StepLogSequence, log_lambda1: f64) -> Result<TimeSet> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_threshold(log_lambda1, "log_lambda1")?;
    let times = select_trailing(seq.values(), log_lambda1, Sense::AtLeast);
    let mut params = BTreeMap::new();
    params.insert("log_lambda1".to_string(), log_lambda1);
    params.insert("ell".to_string(), seq.ell() as f64);
    TimeSet::from_times(times, seq.len() as u64, params)
}

/// Largest `n` such that every prefix average `(1/k) sum_{j<k} a_j` for
/// `k <= n` is at least `log_lambda2` (non-strict); 0 if the first value
/// already fails. Fed the log-ratio sequence this is the depth up to which
/// the orbit is averaged-dominated at rate `lambda_2`.
pub fn averaged_domination_prefix(seq_ratio: &StepLogSequence, log_lambda2: f64) -> Result<u64> {
    if seq_ratio.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_threshold(log_lambda2, "log_lambda2")?;
    let mut acc = 0.0_f64;
    for (k, &a) in seq_ratio.values().iter().enumerate() {
        acc += a - log_lambda2;
        if acc < 0.0 {
            return Ok(k as u64);
        }
    }
    Ok(seq_ratio.len() as u64)
}

/// Hyperbolic times that additionally fall inside the averaged-domination
/// prefix: the finite-orbit HD set at `(lambda_1, lambda_2)`.
pub fn hd_times(
    seq_e: &StepLogSequence,
    seq_ratio: &StepLogSequence,
    log_lambda1: f64,
    log_lambda2: f64,
) -> Result<TimeSet> {
    check_compatible(seq_e, seq_ratio)?;
    let hyp = hyperbolic_times(seq_e, log_lambda1)?;
    let prefix = averaged_domination_prefix(seq_ratio, log_lambda2)?;
    let times = hyp
        .times()
        .iter()
        .copied()
        .take_while(|&t| t <= prefix)
        .collect();
    let mut params = hyp.params().clone();
    params.insert("log_lambda2".to_string(), log_lambda2);
    TimeSet::from_times(times, hyp.horizon(), params)
}

/// Pliss selection: the maximal set of times whose every trailing average is
/// strictly below `zeta`. Requires `a_i <= bound_l` throughout (rejected
/// with the first offending index) and `eta < zeta < bound_l`.
pub fn pliss_select(
    seq: &StepLogSequence,
    bound_l: f64,
    eta: f64,
    zeta: f64,
) -> Result<TimeSet> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    for v in [bound_l, eta, zeta] {
        check_threshold(v, "pliss threshold")?;
    }
    if !(eta < zeta && zeta < bound_l) {
        return Err(Error::ThresholdOrder {
            relation: format!("require eta < zeta < L, got eta={eta}, zeta={zeta}, L={bound_l}"),
        });
    }
    for (i, &a) in seq.values().iter().enumerate() {
        if a > bound_l {
            return Err(Error::BoundExceeded {
                index: i,
                value: a,
                bound: bound_l,
            });
        }
    }
    let times = select_trailing(seq.values(), zeta, Sense::StrictlyBelow);
    let mut params = BTreeMap::new();
    params.insert("bound_l".to_string(), bound_l);
    params.insert("eta".to_string(), eta);
    params.insert("zeta".to_string(), zeta);
    TimeSet::from_times(times, seq.len() as u64, params)
}

/// Times whose every trailing average is at most `gamma` (non-strict):
/// the mirror of [`hyperbolic_times`] under negation, and implemented as
/// exactly that, so the mirror identity holds bit-for-bit.
pub fn t_ell_times(trace: &StepLogSequence, gamma: f64) -> Result<TimeSet> {
    if trace.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_threshold(gamma, "gamma")?;
    let mirrored = hyperbolic_times(&trace.negated(), -gamma)?;
    let mut params = BTreeMap::new();
    params.insert("gamma".to_string(), gamma);
    params.insert("ell".to_string(), trace.ell() as f64);
    TimeSet::from_times(mirrored.times().to_vec(), mirrored.horizon(), params)
}

/// Density estimates for a finite time set.
///
/// `prefix_profile[n-1]` is `#(times <= n) / n`. The lower/upper estimates
/// are the min/max of the profile over a trailing window of
/// `max(32, N/10)` prefixes ending at the horizon; the window is reported so
/// a consumer can see what the estimates were taken over. True asymptotic
/// densities are liminf/limsup and are not computable from finite data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityStats {
    pub d_lower_est: f64,
    pub d_upper_est: f64,
    /// `(first, last)` prefix lengths of the estimation window, inclusive.
    pub window: (u64, u64),
    pub prefix_profile: Vec<f64>,
}

impl DensityStats {
    /// Profile rows as `n,prefix_frequency` CSV (header included).
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("n,prefix_frequency\n");
        for (i, p) in self.prefix_profile.iter().enumerate() {
            out.push_str(&format!("{},{:.17e}\n", i + 1, p));
        }
        out
    }
}

/// Prefix-density statistics of a time set over its horizon.
pub fn density(ts: &TimeSet) -> Result<DensityStats> {
    let n = ts.horizon();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let n_us = n as usize;
    let mut profile = Vec::with_capacity(n_us);
    let mut count = 0usize;
    let mut next = 0usize; // index into ts.times()
    let times = ts.times();
    for prefix in 1..=n_us {
        while next < times.len() && times[next] <= prefix as u64 {
            count += 1;
            next += 1;
        }
        profile.push(count as f64 / prefix as f64);
    }
    let window_len = DENSITY_WINDOW_MIN.max(n_us / 10).min(n_us);
    let window_lo = n_us - window_len + 1;
    let (mut lo_est, mut hi_est) = (f64::INFINITY, f64::NEG_INFINITY);
    for prefix in window_lo..=n_us {
        let p = profile[prefix - 1];
        lo_est = lo_est.min(p);
        hi_est = hi_est.max(p);
    }
    Ok(DensityStats {
        d_lower_est: lo_est,
        d_upper_est: hi_est,
        window: (window_lo as u64, n),
        prefix_profile: profile,
    })
}

/// Outcome of a truncated "for all n" block-membership check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockVerdict {
    /// Largest `n` for which every block inequality up to `n` was verified.
    pub member_up_to: u64,
    /// Horizon the check ran to.
    pub horizon: u64,
    /// True when the data ran out while still passing, i.e. the orbit may be
    /// a member of the untruncated block.
    pub is_member_truncated: bool,
}

impl BlockVerdict {
    fn new(member_up_to: u64, horizon: u64) -> Self {
        Self {
            member_up_to,
            horizon,
            is_member_truncated: member_up_to == horizon,
        }
    }
}

/// Largest `n` with all prefix averages of `trace` at most `gamma`
/// (non-strict), truncated at the trace length.
pub fn block_h(trace: &StepLogSequence, gamma: f64) -> Result<BlockVerdict> {
    if trace.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_threshold(gamma, "gamma")?;
    let mut acc = 0.0_f64;
    let mut up_to = trace.len() as u64;
    for (k, &a) in trace.values().iter().enumerate() {
        acc += a - gamma;
        if acc > 0.0 {
            up_to = k as u64;
            break;
        }
    }
    Ok(BlockVerdict::new(up_to, trace.len() as u64))
}

/// Largest `n` with all prefix averages of the expansion trace at least
/// `gamma1` and of the contraction trace at most `gamma2`, simultaneously.
pub fn block_lambda(
    seq_e: &StepLogSequence,
    seq_f: &StepLogSequence,
    gamma1: f64,
    gamma2: f64,
) -> Result<BlockVerdict> {
    check_compatible(seq_e, seq_f)?;
    check_threshold(gamma1, "gamma1")?;
    check_threshold(gamma2, "gamma2")?;
    let n = seq_e.len();
    let mut acc_e = 0.0_f64;
    let mut acc_f = 0.0_f64;
    let mut up_to = n as u64;
    for k in 0..n {
        acc_e += seq_e.values()[k] - gamma1;
        acc_f += seq_f.values()[k] - gamma2;
        if acc_e < 0.0 || acc_f > 0.0 {
            up_to = k as u64;
            break;
        }
    }
    Ok(BlockVerdict::new(up_to, n as u64))
}

/// Machine-checked theorem instance: whenever the two-sided prefix block
/// passes up to some depth, the averaged-domination prefix at rate
/// `gamma1 - gamma2` must reach at least that depth. Returns the implication
/// (vacuously true when the block fails immediately); a `false` is a bug in
/// one of the two routes, not a property of the input.
pub fn block_to_domination_check(
    seq_e: &StepLogSequence,
    seq_f: &StepLogSequence,
    gamma1: f64,
    gamma2: f64,
    n: usize,
) -> Result<bool> {
    check_compatible(seq_e, seq_f)?;
    if !(gamma1 > gamma2) {
        return Err(Error::ThresholdOrder {
            relation: format!("require gamma1 > gamma2, got gamma1={gamma1}, gamma2={gamma2}"),
        });
    }
    if n == 0 || n > seq_e.len() {
        return Err(Error::InvalidSpec {
            reason: format!("horizon {n} outside [1, {}]", seq_e.len()),
        });
    }
    let e_trunc = StepLogSequence::new(seq_e.values()[..n].to_vec(), seq_e.kind(), seq_e.ell())?;
    let f_trunc = StepLogSequence::new(seq_f.values()[..n].to_vec(), seq_f.kind(), seq_f.ell())?;
    let verdict = block_lambda(&e_trunc, &f_trunc, gamma1, gamma2)?;
    let ratio: Vec<f64> = e_trunc
        .values()
        .iter()
        .zip(f_trunc.values())
        .map(|(e, f)| e - f)
        .collect();
    let ratio_seq = StepLogSequence::new(ratio, SeqKind::LogRatio, seq_e.ell())?;
    let prefix = averaged_domination_prefix(&ratio_seq, gamma1 - gamma2)?;
    Ok(prefix >= verdict.member_up_to)
}

/// High-density block membership: does the HD set at
/// `(log_lambda1, log_lambda2) = (gamma1, gamma1 - gamma2)` have estimated
/// lower density at least `theta`? Returns the verdict with the statistics
/// it was read from.
pub fn high_density_block(
    seq_e: &StepLogSequence,
    seq_ratio: &StepLogSequence,
    gamma1: f64,
    gamma2: f64,
    theta: f64,
    ell: usize,
) -> Result<(bool, DensityStats)> {
    check_compatible(seq_e, seq_ratio)?;
    if seq_e.ell() != ell {
        return Err(Error::MismatchedSequences {
            left: seq_e.ell(),
            right: ell,
        });
    }
    if !(gamma1 > gamma2.max(0.0)) {
        return Err(Error::ThresholdOrder {
            relation: format!(
                "require gamma1 > max(0, gamma2), got gamma1={gamma1}, gamma2={gamma2}"
            ),
        });
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidSpec {
            reason: format!("theta must lie in [0,1], got {theta}"),
        });
    }
    let hd = hd_times(seq_e, seq_ratio, gamma1, gamma1 - gamma2)?;
    let stats = density(&hd)?;
    Ok((stats.d_lower_est >= theta, stats))
}

fn check_threshold(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite {
            what: what.to_string(),
            value: v,
        });
    }
    Ok(())
}

fn check_compatible(a: &StepLogSequence, b: &StepLogSequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::MismatchedSequences {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.ell() != b.ell() {
        return Err(Error::MismatchedSequences {
            left: a.ell(),
            right: b.ell(),
        });
    }
    Ok(())
}
