//! Algebraic cross-checks between independent routes: closed-form vs generic
//! generator, superoperators vs Bloch fields, and the exponent formulas.

use proptest::prelude::*;
use qfeedback::analysis::{generator_of, norm_ratio, FiniteDifference};
use qfeedback::dynamics::{
    bloch_image, diffusion_actual, diffusion_estimate, drift_actual, drift_estimate, superoperator_g,
    superoperator_l,
};
use qfeedback::qstate::{bloch_to_density, BlochVector, CoupledState, TargetState};
use qfeedback::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball<R: Rng>(rng: &mut R) -> BlochVector {
    qfeedback::ensemble::sample_ball(rng)
}

fn random_params<R: Rng>(rng: &mut R) -> (PhysParams, EstParams) {
    loop {
        let p = PhysParams::new(rng.random_range(0.0..2.0), rng.random_range(0.05..=1.0), rng.random_range(0.1..3.0)).unwrap();
        let e = EstParams::new(rng.random_range(0.0..2.0), rng.random_range(0.05..=1.0), rng.random_range(0.1..3.0)).unwrap();
        if validate_param_condition(&p, &e).ok {
            return (p, e);
        }
    }
}

#[test]
fn closed_and_generic_generators_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (p, e) = random_params(&mut rng);
        for _ in 0..1000 {
            let s = CoupledState { actual: ball(&mut rng), estimate: ball(&mut rng) };
            let u = rng.random_range(-10.0..10.0);
            let closed = generator_v_closed(&s, u, &p, &e).unwrap();
            let generic = generator_v_numeric(&s, u, &p, &e, TargetState::Excited, DerivativeMode::Analytic).unwrap();
            worst = worst.max((closed - generic).abs());
        }
    }
    assert!(worst < 1e-9, "max deviation {worst}");
}

#[test]
fn finite_difference_generator_is_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, e) = random_params(&mut rng);
    for _ in 0..200 {
        let mut s = CoupledState { actual: ball(&mut rng), estimate: ball(&mut rng) };
        // keep clear of the pole where the finite-difference stencil crosses z = 1
        s.actual.z = s.actual.z.min(0.9);
        s.estimate.z = s.estimate.z.min(0.9);
        let u = rng.random_range(-5.0..5.0);
        let closed = generator_v_closed(&s, u, &p, &e).unwrap();
        let fd = generator_v_numeric(&s, u, &p, &e, TargetState::Excited, DerivativeMode::FiniteDifference).unwrap();
        assert!((closed - fd).abs() < 1e-5, "{closed} vs {fd}");
    }
}

#[test]
fn ground_generator_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (p, e) = random_params(&mut rng);
    for _ in 0..200 {
        let mut s = CoupledState { actual: ball(&mut rng), estimate: ball(&mut rng) };
        s.actual.z = s.actual.z.max(-0.9);
        s.estimate.z = s.estimate.z.max(-0.9);
        let u = rng.random_range(-5.0..5.0);
        let analytic = generator_v_numeric(&s, u, &p, &e, TargetState::Ground, DerivativeMode::Analytic).unwrap();
        let fd = generator_v_numeric(&s, u, &p, &e, TargetState::Ground, DerivativeMode::FiniteDifference).unwrap();
        assert!((analytic - fd).abs() < 1e-5);
    }
}

#[test]
fn generic_generator_on_coordinate_functions() {
    // L z = -u x and L z_hat = -u x_hat - (1 - z_hat^2) E: linear functions see only the drift.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (p, e) = random_params(&mut rng);
    let s = CoupledState { actual: ball(&mut rng), estimate: ball(&mut rng) };
    let lz = generator_of(&FiniteDifference { f: |v: &[f64; 6]| v[2], h: 1e-4 }, &s, 1.5, &p, &e);
    assert!((lz + 1.5 * s.actual.x).abs() < 1e-9);
    let lzh = generator_of(&FiniteDifference { f: |v: &[f64; 6]| v[5], h: 1e-4 }, &s, 1.5, &p, &e);
    assert!((lzh - drift_estimate(&s, 1.5, &p, &e).dz).abs() < 1e-9);
    // L z^2 = 2 z (-u x) + (sqrt(eta M)(1 - z^2))^2
    let lz2 = generator_of(&FiniteDifference { f: |v: &[f64; 6]| v[2] * v[2], h: 1e-4 }, &s, 1.5, &p, &e);
    let sigma = p.signal_rate() * (1.0 - s.actual.z * s.actual.z);
    assert!((lz2 - (-3.0 * s.actual.z * s.actual.x + sigma * sigma)).abs() < 1e-6);
}

#[test]
fn superoperators_match_bloch_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let b = ball(&mut rng);
        let u = rng.random_range(-10.0..10.0);
        let (p, _) = random_params(&mut rng);
        let rho = bloch_to_density(b).unwrap();
        let l = superoperator_l(&rho, u, &p);
        let g = superoperator_g(&rho, &p);
        let (li, gi) = (bloch_image(&l), bloch_image(&g));
        let (d, s) = (drift_actual(&b, u, &p), diffusion_actual(&b, &p));
        assert!((li.dx - d.dx).abs() < 1e-12 && (li.dy - d.dy).abs() < 1e-12 && (li.dz - d.dz).abs() < 1e-12);
        assert!((gi.dx - s.dx).abs() < 1e-12 && (gi.dy - s.dy).abs() < 1e-12 && (gi.dz - s.dz).abs() < 1e-12);
        assert!((l[0][0] + l[1][1]).norm() < 1e-13);
        assert!((g[0][0] + g[1][1]).norm() < 1e-13);
        // Hermitian
        assert!((l[1][0] - l[0][1].conj()).norm() < 1e-13);
        assert!((g[1][0] - g[0][1].conj()).norm() < 1e-13);
    }
}

#[test]
fn exact_filter_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let (p, _) = random_params(&mut rng);
        let e = p.exact_estimate();
        let b = ball(&mut rng);
        let s = CoupledState { actual: b, estimate: b };
        let u = rng.random_range(-3.0..3.0);
        assert_eq!(drift_estimate(&s, u, &p, &e), drift_actual(&b, u, &p));
        assert_eq!(diffusion_estimate(&b, &e), diffusion_actual(&b, &p));
    }
}

#[test]
fn nu_av_negative_under_param_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let (p, e) = random_params(&mut rng);
        assert!(nu_av(&p, &e) < 0.0);
        assert!(nu_s(&p, &e) < 0.0);
        assert!(k_bound(&p, &e) > 0.0);
    }
}

#[test]
fn lyapunov_and_bures_are_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..100_000 {
        let s = CoupledState { actual: ball(&mut rng), estimate: ball(&mut rng) };
        for target in [TargetState::Excited, TargetState::Ground] {
            if let Some(r) = norm_ratio(&s, target) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    // per component sqrt(1 - z) / sqrt(2 - 2 sqrt((1 + z)/2)) ranges over [1, sqrt 2]
    assert!(lo >= 1.0 - 1e-9, "lower envelope {lo}");
    assert!(hi <= std::f64::consts::SQRT_2 + 1e-9, "upper envelope {hi}");
    assert!(hi / lo < 1.5);
}

proptest! {
    #[test]
    fn feedback_is_bounded_and_vanishes_only_at_target(z in -1.0f64..=1.0, alpha in 0.1f64..20.0, beta in 1.0f64..4.0) {
        let law = FeedbackLaw::power(TargetState::Excited, alpha, beta);
        let u = law.u(&BlochVector::new_unchecked(0.0, 0.0, z));
        prop_assert!(u >= 0.0 && u <= alpha);
        prop_assert!((u - alpha * ((1.0 - z) / 2.0).powf(beta)).abs() <= 1e-12 * alpha);
        if z < 1.0 { prop_assert!(u > 0.0 || ((1.0 - z) / 2.0).powf(beta) == 0.0); }
    }

    #[test]
    fn project_lands_in_ball(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
        let b = qfeedback::integrator::project(BlochVector::new_unchecked(x, y, z));
        prop_assert!(b.norm_sq() <= 1.0 + 1e-15);
        if x * x + y * y + z * z <= 1.0 {
            prop_assert_eq!(b, BlochVector::new_unchecked(x, y, z));
        }
    }
}
