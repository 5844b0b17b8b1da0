//! Phase-space integration tests: builtin maps, inverse consistency,
//! Jacobian cross-checks, and orbit construction.

use hyptime_core::phase::{
    chart_distance, chart_offset, fd_tangent, make_orbit, probe_inverse_consistency,
    skew_nonuniform, tangent_at, Cat2, Diag3, InverseSystem, NewtonInverted, Point, SmoothSystem,
    Space,
};
use hyptime_core::rng;
use nalgebra::DVector;
use rand::Rng;

/// Roundtrip residual `backward(forward(x))` must stay below.
const TOL_ROUNDTRIP: f64 = 1e-12;

/// Relative agreement required between analytic and finite-difference
/// Jacobians.
const TOL_FD_REL: f64 = 1e-6;

/// Finite-difference step for the Jacobian cross-checks.
const FD_STEP: f64 = 1e-5;

fn torus_point(coords: &[f64]) -> Point {
    Point::from_slice(Space::Torus(coords.len()), coords).expect("valid torus point")
}

fn euclid_point(coords: &[f64]) -> Point {
    Point::from_slice(Space::Euclidean(coords.len()), coords).expect("valid euclidean point")
}

#[test]
fn torus_map_advances_the_documented_points() {
    let x = torus_point(&[0.1, 0.2]);
    let y = Cat2.forward(&x).unwrap();
    assert!((y.coords()[0] - 0.4).abs() < 1e-15);
    assert!((y.coords()[1] - 0.3).abs() < 1e-15);

    // A step that crosses the fundamental domain wraps back into [0, 1).
    let x = torus_point(&[0.7, 0.9]);
    let y = Cat2.forward(&x).unwrap();
    assert!((y.coords()[0] - 0.3).abs() < 1e-12);
    assert!((y.coords()[1] - 0.6).abs() < 1e-12);
    assert!(y.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
}

#[test]
fn diagonal_dynamics_scale_each_axis_by_its_rate() {
    let x = euclid_point(&[0.3, -0.2, 0.8]);
    let y = Diag3.forward(&x).unwrap();
    assert!((y.coords()[0] - 1.2).abs() < 1e-15);
    assert!((y.coords()[1] + 0.4).abs() < 1e-15);
    assert!((y.coords()[2] - 0.1).abs() < 1e-15);

    // The origin is a fixed point, exactly.
    let origin = euclid_point(&[0.0, 0.0, 0.0]);
    let image = Diag3.forward(&origin).unwrap();
    assert_eq!(image.coords(), origin.coords());
}

#[test]
fn backward_undoes_forward_on_a_thousand_random_points() {
    let worst_cat = probe_inverse_consistency(&Cat2, 1000, 7).unwrap();
    assert!(
        worst_cat <= TOL_ROUNDTRIP,
        "torus roundtrip residual {worst_cat:.3e}"
    );
    let worst_diag = probe_inverse_consistency(&Diag3, 1000, 7).unwrap();
    assert!(
        worst_diag <= TOL_ROUNDTRIP,
        "diagonal roundtrip residual {worst_diag:.3e}"
    );
}

#[test]
fn skew_product_roundtrips_at_every_interior_clock() {
    let system = skew_nonuniform(64, 3).unwrap();
    let mut r = rng::stream(3, "skew-roundtrip", 0);
    for tau in -63..63 {
        let fiber = [r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0];
        let x = system.point_at(tau, &fiber).unwrap();
        let roundtrip = system.backward(&system.forward(&x).unwrap()).unwrap();
        let residual = chart_distance(&x, &roundtrip).unwrap();
        assert!(
            residual <= TOL_ROUNDTRIP,
            "clock {tau}: roundtrip residual {residual:.3e}"
        );
    }
}

#[test]
fn analytic_jacobians_match_central_differences() {
    let systems: [(&dyn SmoothSystem, &str); 2] = [(&Cat2, "cat2"), (&Diag3, "diag3")];
    for (system, name) in systems {
        let mut r = rng::stream(11, "fd-points", 0);
        for _ in 0..100 {
            let coords: Vec<f64> = (0..system.dim()).map(|_| r.random::<f64>()).collect();
            let x = Point::from_slice(system.space(), &coords).unwrap();
            let analytic = tangent_at(system, &x).unwrap();
            let numeric = fd_tangent(system, &x, FD_STEP).unwrap();
            let rel = (&numeric - &analytic).norm() / analytic.norm();
            assert!(rel <= TOL_FD_REL, "{name}: relative Jacobian error {rel:.3e}");
        }
    }
}

#[test]
fn skew_fiber_jacobian_matches_central_differences() {
    // The clock coordinate is discrete, so finite differences only make
    // sense in the fiber directions; the dynamics is linear there, so the
    // agreement should be at roundoff level.
    let system = skew_nonuniform(32, 5).unwrap();
    let x = system.point_at(0, &[0.7, -0.4]).unwrap();
    let analytic = tangent_at(&system, &x).unwrap();
    for c in 1..3 {
        let mut e = DVector::zeros(3);
        e[c] = FD_STEP;
        let plus = system.forward(&x.displaced(&e).unwrap()).unwrap();
        e[c] = -FD_STEP;
        let minus = system.forward(&x.displaced(&e).unwrap()).unwrap();
        for row in 0..3 {
            let fd = (plus.coords()[row] - minus.coords()[row]) / (2.0 * FD_STEP);
            assert!(
                (fd - analytic[(row, c)]).abs() <= 1e-9,
                "entry ({row}, {c}): fd {fd} vs analytic {}",
                analytic[(row, c)]
            );
        }
    }
}

#[test]
fn orbit_construction_is_deterministic_and_indexed_by_signed_time() {
    let x0 = torus_point(&[0.1, 0.2]);
    let a = make_orbit(&Cat2, &x0, 50, 10).unwrap();
    let b = make_orbit(&Cat2, &x0, 50, 10).unwrap();
    assert_eq!(a.range(), (-10, 50));
    assert_eq!(a.n_forward(), 50);
    assert_eq!(a.n_backward(), 10);
    for j in -10..=50 {
        let pa = a.point(j).unwrap();
        let pb = b.point(j).unwrap();
        for (x, y) in pa.coords().iter().zip(pb.coords().iter()) {
            assert_eq!(x.to_bits(), y.to_bits(), "point {j} differs between runs");
        }
    }
    for j in -10..50 {
        let ja = a.jacobian(j).unwrap();
        let jb = b.jacobian(j).unwrap();
        assert_eq!(ja, jb, "jacobian {j} differs between runs");
    }
    // The stored orbit is consistent with stepping the map directly.
    for j in -10..50 {
        let stepped = Cat2.forward(a.point(j).unwrap()).unwrap();
        let stored = a.point(j + 1).unwrap();
        assert!(chart_distance(&stepped, stored).unwrap() <= TOL_ROUNDTRIP);
    }
    // Window bounds are enforced on both points and Jacobians.
    assert!(a.point(51).is_err());
    assert!(a.point(-11).is_err());
    assert!(a.jacobian(50).is_err());
    assert_eq!(a.base().coords(), x0.coords());
}

#[test]
fn newton_inversion_recovers_the_analytic_inverse() {
    let newton = NewtonInverted::new(Cat2);
    let mut r = rng::stream(13, "newton-points", 0);
    for _ in 0..100 {
        let x = torus_point(&[r.random::<f64>(), r.random::<f64>()]);
        let via_newton = newton.backward(&x).unwrap();
        let via_matrix = Cat2.backward(&x).unwrap();
        let gap = chart_distance(&via_newton, &via_matrix).unwrap();
        assert!(gap <= 1e-10, "inverse gap {gap:.3e}");
    }
    // Backward orbit steps pass the construction-time roundtrip validation.
    let orbit = make_orbit(&newton, &torus_point(&[0.3, 0.4]), 5, 5).unwrap();
    assert_eq!(orbit.range(), (-5, 5));
}

#[test]
fn inverse_wrapper_swaps_the_direction_of_time() {
    let inverse = InverseSystem::new(Diag3);
    let x = euclid_point(&[0.4, 0.6, 0.5]);
    let forward_of_inverse = inverse.forward(&x).unwrap();
    let backward_of_inner = Diag3.backward(&x).unwrap();
    assert_eq!(forward_of_inverse.coords(), backward_of_inner.coords());

    let tangent_of_inverse = inverse.tangent(&x).unwrap();
    let backward_tangent = Diag3.tangent_backward(&x).unwrap();
    assert_eq!(tangent_of_inverse, backward_tangent);

    // Wrapping twice restores the original time direction.
    let double = InverseSystem::new(InverseSystem::new(Diag3));
    let direct = Diag3.forward(&x).unwrap();
    let via_double = double.forward(&x).unwrap();
    assert_eq!(direct.coords(), via_double.coords());
}

#[test]
fn chart_offsets_wrap_to_the_nearest_representative() {
    let a = torus_point(&[0.05, 0.5]);
    let b = torus_point(&[0.95, 0.5]);
    let d = chart_distance(&a, &b).unwrap();
    assert!((d - 0.1).abs() < 1e-15, "wrapped distance {d}");
    let offset = chart_offset(&a, &b).unwrap();
    assert!(offset.iter().all(|&c| c > -0.5 && c <= 0.5));

    assert_eq!(chart_distance(&a, &a).unwrap(), 0.0);

    // The same coordinates in a flat space are far apart.
    let a_flat = euclid_point(&[0.05, 0.5]);
    let b_flat = euclid_point(&[0.95, 0.5]);
    assert!((chart_distance(&a_flat, &b_flat).unwrap() - 0.9).abs() < 1e-15);

    // Displacement wraps back into the fundamental domain.
    let moved = torus_point(&[0.9, 0.0])
        .displaced(&DVector::from_column_slice(&[0.2, 0.0]))
        .unwrap();
    assert!((moved.coords()[0] - 0.1).abs() < 1e-12);
}

#[test]
fn mixing_phase_spaces_is_rejected() {
    let on_torus = torus_point(&[0.1, 0.2]);
    let flat = euclid_point(&[0.1, 0.2]);
    assert!(chart_distance(&on_torus, &flat).is_err());
    assert!(Diag3.forward(&on_torus).is_err());
}
