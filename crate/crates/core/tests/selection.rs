//! Selection integration tests: agreement with the literal brute-force
//! evaluators, order-theoretic properties of the selections, block
//! membership, densities, and the calibrated Pliss frequency bound.

use std::collections::BTreeMap;

use hyptime_core::rng;
use hyptime_core::synthlab::{
    brute_force_prefix, brute_force_times, calibrate_rho, gen_sequence, Sense, SequenceSpec,
};
use hyptime_core::times::{
    averaged_domination_prefix, block_h, block_lambda, block_to_domination_check, density,
    hd_times, high_density_block, hyperbolic_times, pliss_select, t_ell_times, StepLogSequence,
    TimeSet,
};
use proptest::prelude::*;
use rand::Rng;

/// Number of seeded random sequences the equivalence sweep runs over.
const EQUIVALENCE_TRIALS: usize = 200;

/// Longest sequence used in the randomized sweeps.
const MAX_LEN: usize = 256;

fn random_values(r: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random::<f64>() * 4.0 - 2.0).collect()
}

fn assert_same_times(fast: &TimeSet, literal: &TimeSet, what: &str, trial: usize) {
    assert_eq!(
        fast.times(),
        literal.times(),
        "{what} diverged from the literal evaluation at trial {trial}"
    );
    assert_eq!(fast.horizon(), literal.horizon());
}

#[test]
fn selections_match_the_literal_evaluators_on_seeded_sequences() {
    let mut r = rng::stream(101, "equivalence-sweep", 0);
    for trial in 0..EQUIVALENCE_TRIALS {
        let len = 1 + r.random_range(0..MAX_LEN);
        let values = random_values(&mut r, len);
        let seq = StepLogSequence::custom(values.clone()).unwrap();
        let threshold = r.random::<f64>() * 2.0 - 1.0;

        let hyp = hyperbolic_times(&seq, threshold).unwrap();
        let hyp_literal = brute_force_times(&values, threshold, Sense::NonstrictAbove).unwrap();
        assert_same_times(&hyp, &hyp_literal, "hyperbolic times", trial);

        let tell = t_ell_times(&seq, threshold).unwrap();
        let tell_literal = brute_force_times(&values, threshold, Sense::NonstrictBelow).unwrap();
        assert_same_times(&tell, &tell_literal, "contraction times", trial);

        let bound = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5;
        if threshold < bound {
            let pliss = pliss_select(&seq, bound, threshold - 1.0, threshold).unwrap();
            let pliss_literal = brute_force_times(&values, threshold, Sense::StrictBelow).unwrap();
            assert_same_times(&pliss, &pliss_literal, "pliss selection", trial);
        }

        let prefix = averaged_domination_prefix(&seq, threshold).unwrap();
        let prefix_literal = brute_force_prefix(&values, threshold, Sense::NonstrictAbove).unwrap();
        assert_eq!(prefix, prefix_literal, "prefix depth diverged at trial {trial}");
    }
}

#[test]
fn mirrored_selection_agrees_elementwise_with_negation() {
    let mut r = rng::stream(103, "mirror-check", 0);
    for _ in 0..100 {
        let len = 1 + r.random_range(0..MAX_LEN);
        let seq = StepLogSequence::custom(random_values(&mut r, len)).unwrap();
        let gamma = r.random::<f64>() - 0.5;
        let mirrored = t_ell_times(&seq, gamma).unwrap();
        let direct = hyperbolic_times(&seq.negated(), -gamma).unwrap();
        assert_eq!(mirrored.times(), direct.times());
    }
}

#[test]
fn block_membership_implies_the_averaged_domination_depth() {
    let mut r = rng::stream(107, "block-traces", 0);
    let mut passing = 0usize;
    for trial in 0..1000 {
        let len = 1 + r.random_range(0..MAX_LEN);
        let gamma1 = r.random::<f64>() * 0.5 + 0.2;
        let gamma2 = -(r.random::<f64>() * 0.5 + 0.2);
        // Bias half the traces so the two-sided block passes to full depth;
        // leave the rest unconstrained (the implication may hold vacuously).
        let biased = trial % 2 == 0;
        let (e_vals, f_vals): (Vec<f64>, Vec<f64>) = (0..len)
            .map(|_| {
                let noise_e = r.random::<f64>() * 0.3;
                let noise_f = r.random::<f64>() * 0.3;
                if biased {
                    (gamma1 + noise_e, gamma2 - noise_f)
                } else {
                    (gamma1 + noise_e - 0.15, gamma2 - noise_f + 0.15)
                }
            })
            .unzip();
        let seq_e = StepLogSequence::custom(e_vals).unwrap();
        let seq_f = StepLogSequence::custom(f_vals).unwrap();
        let verdict = block_lambda(&seq_e, &seq_f, gamma1, gamma2).unwrap();
        if verdict.member_up_to == verdict.horizon {
            passing += 1;
        }
        assert!(
            block_to_domination_check(&seq_e, &seq_f, gamma1, gamma2, len).unwrap(),
            "implication failed at trial {trial}"
        );
    }
    assert!(passing >= 400, "only {passing} traces passed their block; bias too weak");
}

#[test]
fn block_checks_truncate_at_the_first_violation() {
    let trace = StepLogSequence::custom(vec![0.1, 0.1, 0.9, 0.1]).unwrap();
    let verdict = block_h(&trace, 0.2).unwrap();
    assert_eq!(verdict.member_up_to, 2);
    assert_eq!(verdict.horizon, 4);
    assert!(!verdict.is_member_truncated);

    let passing = StepLogSequence::custom(vec![0.1, 0.2, 0.15]).unwrap();
    let verdict = block_h(&passing, 0.2).unwrap();
    assert_eq!(verdict.member_up_to, 3);
    assert!(verdict.is_member_truncated);

    // The two-sided block fails as soon as either side does.
    let seq_e = StepLogSequence::custom(vec![0.5, 0.5, 0.1, 0.5]).unwrap();
    let seq_f = StepLogSequence::custom(vec![-0.5, -0.5, -0.5, -0.5]).unwrap();
    let verdict = block_lambda(&seq_e, &seq_f, 0.4, -0.4).unwrap();
    assert_eq!(verdict.member_up_to, 2);
}

#[test]
fn density_profile_recounts_the_time_set() {
    let times: Vec<u64> = (1..=400).filter(|n| n % 3 == 0).collect();
    let ts = TimeSet::from_times(times.clone(), 400, BTreeMap::new()).unwrap();
    let stats = density(&ts).unwrap();
    assert_eq!(stats.prefix_profile.len(), 400);
    for n in 1..=400u64 {
        let count = times.iter().filter(|&&t| t <= n).count();
        let expected = count as f64 / n as f64;
        assert_eq!(stats.prefix_profile[(n - 1) as usize], expected);
    }
    // The estimation window is the trailing tenth (at least 32 prefixes).
    assert_eq!(stats.window, (361, 400));
    assert!(stats.d_lower_est <= stats.d_upper_est);
    assert!((stats.d_lower_est - 1.0 / 3.0).abs() < 0.01);

    let csv = stats.profile_csv();
    assert!(csv.starts_with("n,prefix_frequency\n"));
    assert_eq!(csv.lines().count(), 401);
}

#[test]
fn high_density_block_reads_the_joint_selection() {
    // Constant expansion and domination: every time is selected, density 1.
    let seq_e = StepLogSequence::custom(vec![1.0; 200]).unwrap();
    let seq_ratio = StepLogSequence::custom(vec![0.8; 200]).unwrap();
    let (member, stats) = high_density_block(&seq_e, &seq_ratio, 0.5, -0.3, 0.9, 1).unwrap();
    assert!(member);
    assert_eq!(stats.d_lower_est, 1.0);
    assert_eq!(stats.d_upper_est, 1.0);

    let hd = hd_times(&seq_e, &seq_ratio, 0.5, 0.8).unwrap();
    assert_eq!(hd.len(), 200);

    // An alternating trace only ever selects its first time, so a strict
    // density demand fails while the statistics are still reported.
    let alternating: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let seq_alt = StepLogSequence::custom(alternating).unwrap();
    let (member, stats) = high_density_block(&seq_alt, &seq_ratio, 0.5, -0.3, 0.9, 1).unwrap();
    assert!(!member);
    assert!(stats.d_lower_est < 0.1);
}

#[test]
fn calibrated_pliss_frequency_survives_random_arrangements() {
    let (bound_l, eta, zeta, theta, len) = (2.0, 0.0, 1.0, 0.25, 512);
    let rho = calibrate_rho(bound_l, eta, zeta, theta, len).unwrap();
    assert!((0.0..1.0).contains(&rho));
    // Strictly more than a rho-fraction of small entries guarantees the
    // selection, whatever the arrangement.
    let min_small = (rho * len as f64).floor() as usize + 1;
    let needed = (theta * len as f64).ceil() as usize;

    // Sharpness: one small entry fewer, arranged adversarially (all maxima
    // first), stays under the demanded selection count. The entries are
    // integers, so the trailing averages compare exactly.
    let mut adversarial = vec![bound_l; len];
    for v in adversarial[len - (min_small - 1)..].iter_mut() {
        *v = eta - 1.0;
    }
    let short = pliss_select(
        &StepLogSequence::custom(adversarial).unwrap(),
        bound_l,
        eta,
        zeta,
    )
    .unwrap();
    assert!(short.len() < needed, "calibration not sharp: {} selected", short.len());

    let mut checked = 0usize;
    for seed in 0..40 {
        let spec = SequenceSpec {
            length: len,
            bound_l,
            small_value: eta,
            small_fraction: 0.65,
            big_value: bound_l,
            seed,
        };
        let seq = gen_sequence(&spec).unwrap();
        let small_count = seq.values().iter().filter(|&&v| v < eta).count();
        if small_count < min_small {
            continue; // realized frequency below the guarantee's hypothesis
        }
        checked += 1;
        let selected = pliss_select(&seq, bound_l, eta, zeta).unwrap();
        assert!(
            selected.len() >= needed,
            "seed {seed}: {} selected, {needed} required at small count {small_count}",
            selected.len()
        );
    }
    assert!(checked >= 35, "only {checked} draws met the calibrated frequency");
}

#[test]
fn brute_force_rejects_oversized_inputs() {
    let too_long = vec![0.0; 5000];
    assert!(brute_force_times(&too_long, 0.0, Sense::NonstrictAbove).is_err());
    assert!(brute_force_prefix(&too_long, 0.0, Sense::NonstrictAbove).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hyperbolic_times_shrink_as_the_threshold_rises(
        values in prop::collection::vec(-2.0f64..2.0, 1..200),
        base in -1.0f64..1.0,
        bump in 0.0f64..1.0,
    ) {
        let seq = StepLogSequence::custom(values).unwrap();
        let loose = hyperbolic_times(&seq, base).unwrap();
        let tight = hyperbolic_times(&seq, base + bump).unwrap();
        for &t in tight.times() {
            prop_assert!(loose.contains(t), "time {t} vanished when the threshold fell");
        }
    }

    #[test]
    fn contraction_times_shrink_as_gamma_falls(
        values in prop::collection::vec(-2.0f64..2.0, 1..200),
        base in -1.0f64..1.0,
        drop in 0.0f64..1.0,
    ) {
        let seq = StepLogSequence::custom(values).unwrap();
        let loose = t_ell_times(&seq, base).unwrap();
        let tight = t_ell_times(&seq, base - drop).unwrap();
        for &t in tight.times() {
            prop_assert!(loose.contains(t), "time {t} vanished when gamma rose");
        }
    }

    #[test]
    fn joint_selection_is_cut_at_the_domination_depth(
        e_vals in prop::collection::vec(-2.0f64..2.0, 1..200),
        ratio_shift in -0.5f64..0.5,
    ) {
        let len = e_vals.len();
        let ratio_vals: Vec<f64> = e_vals.iter().map(|v| v + ratio_shift).collect();
        let seq_e = StepLogSequence::custom(e_vals).unwrap();
        let seq_ratio = StepLogSequence::custom(ratio_vals).unwrap();
        let joint = hd_times(&seq_e, &seq_ratio, 0.3, 0.1).unwrap();
        let prefix = averaged_domination_prefix(&seq_ratio, 0.1).unwrap();
        let hyp = hyperbolic_times(&seq_e, 0.3).unwrap();
        for &t in joint.times() {
            prop_assert!(t <= prefix);
            prop_assert!(hyp.contains(t));
        }
        // Every hyperbolic time inside the prefix survives into the joint set.
        for &t in hyp.times() {
            if t <= prefix {
                prop_assert!(joint.contains(t));
            }
        }
        prop_assert_eq!(joint.horizon(), len as u64);
    }

    #[test]
    fn density_estimates_stay_inside_the_unit_interval(
        mask in prop::collection::vec(prop::bool::ANY, 33..300),
    ) {
        let times: Vec<u64> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i as u64 + 1))
            .collect();
        let ts = TimeSet::from_times(times, mask.len() as u64, BTreeMap::new()).unwrap();
        let stats = density(&ts).unwrap();
        prop_assert!(stats.d_lower_est >= 0.0);
        prop_assert!(stats.d_lower_est <= stats.d_upper_est);
        prop_assert!(stats.d_upper_est <= 1.0);
        prop_assert_eq!(stats.prefix_profile.len(), mask.len());
        let (lo, hi) = stats.window;
        prop_assert!(lo >= 1 && hi == mask.len() as u64);
        prop_assert!(hi - lo + 1 >= 32.min(mask.len() as u64));
    }
}
