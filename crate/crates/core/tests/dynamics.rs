mod common;

use std::f64::consts::PI;

use filtered_vortex::diagnostics::conserved_quantities;
use filtered_vortex::dynamics::{integrate, rhs, velocity_field};
use filtered_vortex::kernels::{make_alpha_kernel, make_blob_kernel};
use filtered_vortex::{IntegratorConfig, Scheme, SmoothingKernel, Trajectory, Vec2, VortexSystem};
use proptest::prelude::*;

fn run(sys: &VortexSystem, cfg: &IntegratorConfig) -> Trajectory {
    integrate(sys, cfg, &mut |_: &VortexSystem| Ok(())).unwrap()
}

fn pair(gamma: f64, d: f64, eps: f64, kernel: SmoothingKernel) -> VortexSystem {
    VortexSystem::new(
        vec![Vec2::new(-0.5 * d, 0.0), Vec2::new(0.5 * d, 0.0)],
        vec![gamma, gamma],
        eps,
        kernel,
    )
    .unwrap()
}

/// Angular velocity of an equal pair: each vortex moves at `Gamma P(d/eps) / (2 pi d)`
/// on a circle of radius `d/2`.
fn pair_omega(gamma: f64, d: f64, eps: f64) -> f64 {
    gamma * common::blob_cumulative_mass(d / eps) / (PI * d * d)
}

fn max_dev(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max)
}

#[test]
fn pair_rotation_rate_matches_profile() {
    let omega = pair_omega(2.0 * PI, 2.0, 1.0);
    assert!((omega - 0.4).abs() < 1e-12);
    let sys = pair(2.0 * PI, 2.0, 1.0, make_blob_kernel());
    let v = rhs(&sys).unwrap();
    assert!((v[1].y - omega).abs() < 1e-12 && v[1].x.abs() < 1e-15);
    assert!((v[0].y + omega).abs() < 1e-12);
}

#[test]
fn co_rotation_returns_after_one_period() {
    let t_end = 5.0 * PI;
    let sys = pair(2.0 * PI, 2.0, 1.0, make_blob_kernel());
    let traj = run(&sys, &IntegratorConfig::rk4(t_end / 20000.0, t_end).with_stride(20000));
    assert_eq!(traj.len(), 2);
    assert!((traj.times()[1] - t_end).abs() < 1e-12);
    assert!(max_dev(traj.positions(1), sys.positions()) < 1e-6);
}

#[test]
fn rk4_error_is_fourth_order() {
    let (gamma, d, eps) = (2.0 * PI * 50.0, 2.0, 1.0);
    let omega = pair_omega(gamma, d, eps);
    assert!((omega - 20.0).abs() < 1e-9);
    let sys = pair(gamma, d, eps, make_blob_kernel());
    let exact: Vec<Vec2> = sys.positions().iter().map(|&p| common::rotate(p, omega)).collect();
    let dts = [0.01, 0.005, 0.0025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| max_dev(run(&sys, &IntegratorConfig::rk4(dt, 1.0)).last().positions(), &exact))
        .collect();
    let slope = common::log_slope(&dts, &errs);
    assert!((3.7..=4.3).contains(&slope), "slope {slope}, errors {errs:?}");
}

#[test]
fn euler_is_first_order() {
    let sys = pair(2.0 * PI, 2.0, 1.0, make_blob_kernel());
    let exact: Vec<Vec2> = sys.positions().iter().map(|&p| common::rotate(p, 0.4)).collect();
    let dts = [0.01, 0.005, 0.0025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let cfg = IntegratorConfig { scheme: Scheme::Euler, ..IntegratorConfig::rk4(dt, 1.0) };
            max_dev(run(&sys, &cfg).last().positions(), &exact)
        })
        .collect();
    let slope = common::log_slope(&dts, &errs);
    assert!((0.9..=1.1).contains(&slope), "slope {slope}");
}

fn random_system(seed: u64, n: usize, kernel: SmoothingKernel, signed: bool) -> VortexSystem {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pos = (0..n).map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let lo = if signed { -1.0 } else { 0.05 };
    let circ = (0..n).map(|_| rng.gen_range(lo..1.0)).collect();
    VortexSystem::new(pos, circ, 0.3, kernel).unwrap()
}

#[test]
fn adaptive_agrees_with_fixed_step() {
    let sys = random_system(7, 12, make_blob_kernel(), true);
    let fixed = run(&sys, &IntegratorConfig::rk4(1e-3, 2.0).with_stride(usize::MAX));
    let cfg = IntegratorConfig {
        scheme: Scheme::Rk45Adaptive,
        dt: 1e-2,
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        ..IntegratorConfig::rk4(1e-2, 2.0)
    };
    let adaptive = run(&sys, &cfg);
    assert!((adaptive.times()[adaptive.len() - 1] - 2.0).abs() < 1e-12);
    let scale = sys.positions().iter().map(|p| p.norm()).fold(1.0, f64::max);
    let dev = max_dev(adaptive.last().positions(), fixed.last().positions());
    assert!(dev <= 10.0 * cfg.rel_tol * scale, "deviation {dev:e}");
}

#[test]
fn time_reversal_recovers_initial_state() {
    for kernel in [make_blob_kernel(), make_alpha_kernel()] {
        let sys = random_system(11, 8, kernel, true);
        let cfg = IntegratorConfig::rk4(1e-3, 1.0).with_stride(usize::MAX);
        let forward = run(&sys, &cfg);
        let back = run(&forward.last().reversed().with_time(0.0), &cfg);
        assert!(max_dev(back.last().positions(), sys.positions()) < 1e-9);
    }
}

#[test]
fn velocity_field_matches_rhs_at_vortices_for_self_free_kernels() {
    let sys = random_system(3, 10, make_blob_kernel(), true);
    let v = rhs(&sys).unwrap();
    let u = velocity_field(&sys, sys.positions());
    // K^eps(0) = 0, so the self term adds nothing
    assert!(max_dev(&u, &v) < 1e-13);
}

#[test]
fn stored_snapshots_follow_stride() {
    let sys = pair(1.0, 1.0, 0.5, make_blob_kernel());
    let traj = run(&sys, &IntegratorConfig::rk4(0.1, 1.0).with_stride(3));
    let t: Vec<f64> = traj.times().to_vec();
    assert_eq!(t.len(), 5);
    for (a, b) in t.iter().zip([0.0, 0.3, 0.6, 0.9, 1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn invariants_hold_on_random_systems(seed in 0u64..10_000, n in 2usize..20, alpha in any::<bool>()) {
        let kernel = if alpha { make_alpha_kernel() } else { make_blob_kernel() };
        let sys = random_system(seed, n, kernel, true);
        let traj = run(&sys, &IntegratorConfig::rk4(1e-2, 1.0).with_stride(usize::MAX));
        let (a, b) = (conserved_quantities(&sys), conserved_quantities(&traj.last()));
        prop_assert_eq!(a.total_circulation, b.total_circulation);
        prop_assert!((a.centroid - b.centroid).norm() < 1e-9);
        prop_assert!((a.second_moment - b.second_moment).abs() < 1e-8);
        let (ha, hb) = (a.hamiltonian.unwrap(), b.hamiltonian.unwrap());
        prop_assert!((ha - hb).abs() <= 1e-6 * ha.abs().max(1.0));
    }

    #[test]
    fn rhs_is_rotation_and_translation_covariant(seed in 0u64..10_000, angle in 0.0..(2.0 * PI), sx in -3.0..3.0f64, sy in -3.0..3.0f64) {
        let sys = random_system(seed, 9, make_blob_kernel(), true);
        let shift = Vec2::new(sx, sy);
        let moved: Vec<Vec2> = sys.positions().iter().map(|&p| common::rotate(p, angle) + shift).collect();
        let moved_sys = sys.advanced(moved, 0.0);
        let v = rhs(&sys).unwrap();
        let w = rhs(&moved_sys).unwrap();
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((common::rotate(*a, angle) - *b).norm() < 1e-10);
        }
    }
}
