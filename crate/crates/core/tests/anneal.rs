mod common;

use approx::assert_abs_diff_eq;
use cqmap_core::anneal::{compare_runs, make_schedule, run_qa, run_qa_scaled, run_sa, Schedule};
use cqmap_core::dynamics::{build_generator, relaxation_time, FlipRule};
use cqmap_core::mapping::classical_to_quantum;
use cqmap_core::model::{gibbs_distribution, ClassicalHamiltonian};
use cqmap_core::spectral::dense_spectrum;
use num_complex::Complex64;

fn ring4() -> ClassicalHamiltonian {
    ClassicalHamiltonian::chain(4, 1.0, 0.0, true).unwrap()
}

fn open4() -> ClassicalHamiltonian {
    ClassicalHamiltonian::chain(4, 1.0, 0.0, false).unwrap()
}

#[test]
fn slow_sa_finds_the_ground_pair() {
    let sched = Schedule::linear(0.1, 3.0, 200.0).unwrap();
    let r = run_sa(&ring4(), &sched, FlipRule::HeatBath, 200).unwrap();
    assert!(r.final_success >= 0.9, "{}", r.final_success);
    assert!(r.norm_drift < 1e-10);
    assert_eq!(r.times.len(), 201);
}

#[test]
fn sudden_limits_keep_the_uniform_state() {
    let sa = run_sa(
        &ring4(),
        &Schedule::linear(0.0, 0.0, 10.0).unwrap(),
        FlipRule::HeatBath,
        10,
    )
    .unwrap();
    assert_abs_diff_eq!(sa.final_success, 2.0 / 16.0, epsilon = 1e-12);
    let qa = run_qa(&ring4(), &Schedule::linear(5.0, 0.0, 1e-4).unwrap(), 4).unwrap();
    assert_abs_diff_eq!(qa.final_success, 2.0 / 16.0, epsilon = 1e-3);
}

#[test]
fn frozen_temperature_reaches_gibbs_weight() {
    let h = ring4();
    let beta = 1.0;
    let w = build_generator(&h, beta, FlipRule::HeatBath).unwrap();
    let tau = relaxation_time(
        &dense_spectrum(&classical_to_quantum(&h, beta, &w).unwrap(), false).unwrap(),
    )
    .unwrap();
    let target = {
        let p = gibbs_distribution(&h, beta).unwrap();
        p.as_slice()[0] + p.as_slice()[15]
    };
    let r = run_sa(
        &h,
        &Schedule::linear(beta, beta, 40.0 * tau).unwrap(),
        FlipRule::HeatBath,
        10,
    )
    .unwrap();
    assert_abs_diff_eq!(r.final_success, target, epsilon = 1e-9);
}

#[test]
fn slow_qa_follows_the_ground_state() {
    let sched = Schedule::linear(5.0, 0.0, 100.0).unwrap();
    let coarse = run_qa(&open4(), &sched, 100).unwrap();
    let fine = run_qa_scaled(&open4(), &sched, 100, 0.5).unwrap();
    assert!(coarse.final_success >= 0.99, "{}", coarse.final_success);
    assert_abs_diff_eq!(coarse.final_success, fine.final_success, epsilon = 1e-8);
    assert!(coarse.norm_drift <= 1e-8);
}

#[test]
fn ring_success_is_capped_by_the_initial_overlap() {
    // scipy DOP853 at rtol 1e-11; the uniform start misses the Γ = 5 ground
    // state by about 1/(4Γ²) on the ring
    let r = run_qa(&ring4(), &Schedule::linear(5.0, 0.0, 100.0).unwrap(), 10).unwrap();
    assert_abs_diff_eq!(r.final_success, 0.988_911_589_445_448_3, epsilon = 1e-7);
}

/// Piecewise-constant midpoint propagator for a single spin, with the
/// closed-form 2x2 exponential.
fn two_level_reference(field: f64, gamma0: f64, horizon: f64, steps: usize) -> f64 {
    let dt = horizon / steps as f64;
    // basis: index 0 = up (energy -field), index 1 = down (+field)
    let mut psi = [Complex64::new(0.5f64.sqrt(), 0.0); 2];
    for k in 0..steps {
        let g = gamma0 * (1.0 - (k as f64 + 0.5) / steps as f64);
        let (az, ax) = (-field, -g);
        let norm = (az * az + ax * ax).sqrt();
        let (c, s) = ((norm * dt).cos(), (norm * dt).sin());
        let i = Complex64::new(0.0, 1.0);
        let (nz, nx) = if norm > 0.0 {
            (az / norm, ax / norm)
        } else {
            (0.0, 0.0)
        };
        let u00 = c - i * s * nz;
        let u11 = c + i * s * nz;
        let u01 = -i * s * nx;
        psi = [u00 * psi[0] + u01 * psi[1], u01 * psi[0] + u11 * psi[1]];
    }
    psi[0].norm_sqr()
}

#[test]
fn single_spin_qa_matches_two_level_propagator() {
    let field = 0.7;
    let h = ClassicalHamiltonian::from_coeffs(1, [(1, -field)]).unwrap();
    for horizon in [1.0, 5.0] {
        let r = run_qa(&h, &Schedule::linear(2.0, 0.0, horizon).unwrap(), 10).unwrap();
        let oracle = two_level_reference(field, 2.0, horizon, 200_000);
        assert_abs_diff_eq!(r.final_success, oracle, epsilon = 1e-7);
    }
}

#[test]
fn longer_horizons_help_both_methods() {
    let h = open4();
    let mut last = (0.0, 0.0);
    for horizon in [25.0, 50.0, 100.0] {
        let sa = run_sa(
            &h,
            &Schedule::linear(0.1, 3.0, horizon).unwrap(),
            FlipRule::HeatBath,
            10,
        )
        .unwrap();
        let qa = run_qa(&h, &Schedule::linear(5.0, 0.0, horizon).unwrap(), 10).unwrap();
        assert!(sa.final_success >= last.0 - 1e-9 && qa.final_success >= last.1 - 1e-9);
        last = (sa.final_success, qa.final_success);
        let cmp = compare_runs(&sa, &qa).unwrap();
        assert_abs_diff_eq!(
            cmp.delta_success,
            qa.final_success - sa.final_success,
            epsilon = 0.0
        );
    }
}

#[test]
fn schedules_and_validation() {
    let log = make_schedule("logarithmic", &[2.0, 1.0], 10.0).unwrap();
    assert_abs_diff_eq!(log.beta(0.0), 2f64.ln() / 2.0, epsilon = 1e-15);
    assert!(log.beta(10.0) > log.beta(0.0));
    assert!(make_schedule("linear", &[1.0], 10.0).is_err());
    assert!(make_schedule("cubic", &[1.0, 2.0], 10.0).is_err());
    let falling = Schedule::linear(3.0, 0.1, 10.0).unwrap();
    assert!(run_sa(&ring4(), &falling, FlipRule::HeatBath, 10).is_err());
    let unfinished = Schedule::linear(5.0, 1.0, 10.0).unwrap();
    assert!(run_qa(&ring4(), &unfinished, 10).is_err());
    let p = Schedule::power(4.0, 2.0, 8.0).unwrap();
    assert_abs_diff_eq!(p.value(4.0), 1.0, epsilon = 1e-15);
    assert_eq!(p.value(20.0), 0.0);
}

#[test]
fn mismatched_problems_cannot_be_compared() {
    let sa = run_sa(
        &ring4(),
        &Schedule::linear(0.1, 1.0, 5.0).unwrap(),
        FlipRule::HeatBath,
        5,
    )
    .unwrap();
    let other = ClassicalHamiltonian::chain(3, 1.0, 0.0, true).unwrap();
    let qa = run_qa(&other, &Schedule::linear(1.0, 0.0, 5.0).unwrap(), 5).unwrap();
    assert!(compare_runs(&sa, &qa).is_err());
}
