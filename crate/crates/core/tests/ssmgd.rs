use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ssmgd_core::chains::{build_cycle_walk, build_two_state, sample_stationary_path, PathSample};
use ssmgd_core::oracle::{build_random_quadratic, minimizer, GradientOracle, QuadraticFamily};
use ssmgd_core::ssmgd::*;

fn problem(d: usize, n: usize, noise: f64, seed: u64, rho: &[f64]) -> Problem<QuadraticFamily> {
    let fam = build_random_quadratic(d, n, 0.5, 2.0, noise, seed).unwrap();
    let ws = minimizer(&fam, rho).unwrap();
    Problem::new(fam, ws).unwrap()
}

#[test]
fn step_size_examples() {
    // 16^{0.75} = 8, so 1/(2·8)
    assert_eq!(step_size(0.75, 2.0, 16).unwrap(), 0.0625);
    assert_eq!(step_size(1.0, 1.0, 10).unwrap(), 0.1);
    assert_eq!(step_size(0.75, 1.0, 1).unwrap(), 1.0);
    assert!(step_size(0.5, 1.0, 1).is_err());
    assert!(step_size(0.75, 1.0, 0).is_err());
    assert!(Schedule::new(1.2, 1.0).is_err());
    assert!(Schedule::new(0.75, 0.0).is_err());
}

#[test]
fn default_checkpoint_grid() {
    assert_eq!(default_checkpoints(10), vec![1, 2, 4, 8, 10]);
    assert_eq!(default_checkpoints(8), vec![1, 2, 4, 8]);
    assert_eq!(default_checkpoints(1), vec![1]);
}

/// `w_{t+1} = w_t − γ_t (A_{z_t} w_t + B_{z_t})` unrolled by hand on 2×2 arrays,
/// together with the initial-error and sampling-error recursions.
#[test]
fn symbolic_unroll_matches_run_decomposed() {
    let a = [[[1.5, 0.3], [0.3, 0.8]], [[0.6, -0.2], [-0.2, 1.9]]];
    let b = [[0.4, -1.0], [-0.7, 0.2]];
    let fam = QuadraticFamily::new(
        a.iter().map(|m| DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])).collect(),
        b.iter().map(|v| DVector::from_column_slice(v)).collect(),
    )
    .unwrap();
    let rho = [0.4, 0.6];
    let ws = minimizer(&fam, &rho).unwrap();
    let wstar = [ws[0], ws[1]];
    let prob = Problem::new(fam, ws).unwrap();
    let path = PathSample { states: vec![1, 0, 0, 1, 1], seed: 0, chain_id: 0 };
    let theta = 0.7;
    let eta = 2.0;
    let sched = Schedule::new(theta, eta).unwrap();
    let w1 = [2.0, -1.0];

    let mv = |m: &[[f64; 2]; 2], x: [f64; 2]| [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]];
    let mut w = w1;
    let mut u = [w1[0] - wstar[0], w1[1] - wstar[1]];
    let mut v = [0.0, 0.0];
    let mut expected = vec![(w, u, v)];
    for t in 1..5 {
        let g = 1.0 / (eta * (t as f64).powf(theta));
        let z = path.states[t - 1];
        let aw = mv(&a[z], w);
        let au = mv(&a[z], u);
        let av = mv(&a[z], v);
        let aws = mv(&a[z], wstar);
        for k in 0..2 {
            w[k] -= g * (aw[k] + b[z][k]);
            u[k] -= g * au[k];
            v[k] -= g * (av[k] + aws[k] + b[z][k]);
        }
        expected.push((w, u, v));
    }
    let traj = run_decomposed(&prob, &path, &sched, &DVector::from_column_slice(&w1), &[1, 2, 3, 4, 5]).unwrap();
    let norm = |x: [f64; 2]| x[0].hypot(x[1]);
    for (i, (w, u, v)) in expected.into_iter().enumerate() {
        let total = norm([w[0] - wstar[0], w[1] - wstar[1]]);
        assert!((traj.total_err[i] - total).abs() < 1e-12);
        assert!((traj.init_err.as_ref().unwrap()[i] - norm(u)).abs() < 1e-12);
        assert!((traj.samp_err.as_ref().unwrap()[i] - norm(v)).abs() < 1e-12);
        assert!(traj.decomposition_gap.as_ref().unwrap()[i] < 1e-12);
    }
}

#[test]
fn noiseless_fixed_point() {
    let d = 3;
    let base = build_random_quadratic(d, 2, 0.5, 2.0, 0.0, 4).unwrap();
    let ws = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
    let offsets = base.operators().iter().map(|a| -(a * &ws)).collect();
    let fam = QuadraticFamily::new(base.operators().to_vec(), offsets).unwrap();
    let prob = Problem::new(fam, ws.clone()).unwrap();
    let chain = build_two_state(0.3, 0.3).unwrap();
    let path = sample_stationary_path(&chain, 500, 1).unwrap();
    let sched = Schedule::new(0.75, 2.0).unwrap();
    let cps = default_checkpoints(500);

    let at_opt = run_decomposed(&prob, &path, &sched, &ws, &cps).unwrap();
    assert!(at_opt.total_err.iter().all(|&e| e < 1e-14));
    assert!(at_opt.init_err.unwrap().iter().all(|&e| e == 0.0));

    let w1 = DVector::from_column_slice(&[3.0, 0.0, 0.0]);
    let away = run_decomposed(&prob, &path, &sched, &w1, &cps).unwrap();
    let samp = away.samp_err.unwrap();
    assert!(samp.iter().all(|&e| e < 1e-13), "{samp:?}");
    for (tot, init) in away.total_err.iter().zip(away.init_err.unwrap()) {
        assert!((tot - init).abs() < 1e-12);
    }
}

#[test]
fn frozen_schedule_keeps_the_point() {
    let rho = [0.5, 0.5];
    let prob = problem(3, 2, 1.0, 8, &rho);
    let path = sample_stationary_path(&build_two_state(0.25, 0.25).unwrap(), 64, 2).unwrap();
    let w1 = DVector::from_column_slice(&[0.1, 0.2, 0.3]);
    let traj = run(&prob, &path, &Schedule::frozen(0.75), &w1, &default_checkpoints(64)).unwrap();
    let r1 = (&w1 - prob.w_star()).norm();
    assert!(traj.total_err.iter().all(|&e| (e - r1).abs() < 1e-15));
    assert!(traj.step_size.iter().all(|&g| g == 0.0));
}

#[test]
fn input_validation() {
    let rho = [0.5, 0.5];
    let prob = problem(2, 2, 1.0, 8, &rho);
    let path = sample_stationary_path(&build_two_state(0.25, 0.25).unwrap(), 10, 2).unwrap();
    let sched = Schedule::new(0.75, 2.0).unwrap();
    let w1 = DVector::zeros(2);
    assert!(run(&prob, &path, &sched, &w1, &[11]).is_err());
    assert!(run(&prob, &path, &sched, &w1, &[3, 2]).is_err());
    assert!(run(&prob, &path, &sched, &w1, &[]).is_err());
    assert!(run(&prob, &path, &sched, &DVector::zeros(3), &[5]).is_err());
    let wide = sample_stationary_path(&build_cycle_walk(4, 0.5).unwrap(), 10, 2).unwrap();
    assert!(run(&prob, &wide, &sched, &w1, &[10]).is_err());
}

#[test]
fn divergent_steps_are_reported() {
    // η far below the true spectral bound makes the first steps explode
    let rho = [0.5, 0.5];
    let prob = problem(2, 2, 1.0, 8, &rho);
    let path = sample_stationary_path(&build_two_state(0.25, 0.25).unwrap(), 5000, 2).unwrap();
    let sched = Schedule::new(1.0, 1e-3).unwrap();
    let err = run(&prob, &path, &sched, &DVector::zeros(2), &[5000]).unwrap_err();
    assert!(matches!(err, ssmgd_core::Error::NonFinite { .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decomposition_is_exact(seed: u64, theta in 0.55f64..=1.0, w in prop::collection::vec(-5.0f64..5.0, 4)) {
        let rho = [0.5, 0.5];
        let prob = problem(4, 2, 1.0, seed, &rho);
        let path = sample_stationary_path(&build_two_state(0.25, 0.25).unwrap(), 2000, seed).unwrap();
        let sched = Schedule::new(theta, 2.0).unwrap();
        let w1 = DVector::from_vec(w);
        let scale = (&w1 - prob.w_star()).norm().max(1.0);
        let traj = run_decomposed(&prob, &path, &sched, &w1, &default_checkpoints(2000)).unwrap();
        prop_assert!(traj.decomposition_gap.unwrap().iter().all(|&g| g <= 1e-8 * scale));
        let plain = run(&prob, &path, &sched, &w1, &default_checkpoints(2000)).unwrap();
        prop_assert_eq!(plain.total_err, traj.total_err);
    }

    #[test]
    fn runs_are_deterministic(seed: u64) {
        let rho = [0.25; 4];
        let prob = problem(3, 4, 1.0, seed, &rho);
        let chain = build_cycle_walk(4, 0.4).unwrap();
        let sched = Schedule::new(0.8, 2.0).unwrap();
        let a = run_decomposed(&prob, &sample_stationary_path(&chain, 300, seed).unwrap(), &sched, &DVector::zeros(3), &[1, 10, 300]).unwrap();
        let b = run_decomposed(&prob, &sample_stationary_path(&chain, 300, seed).unwrap(), &sched, &DVector::zeros(3), &[1, 10, 300]).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn iterates_approach_the_minimizer() {
    let rho = [0.5, 0.5];
    let prob = problem(5, 2, 1.0, 3, &rho);
    let path = sample_stationary_path(&build_two_state(0.25, 0.25).unwrap(), 20_000, 9).unwrap();
    let w1 = DVector::from_element(5, 1.0);
    let traj = run(&prob, &path, &Schedule::new(0.75, 2.0).unwrap(), &w1, &[1, 20_000]).unwrap();
    assert!(traj.total_err[1] < 0.2 * traj.total_err[0]);
    assert_relative_eq!(traj.total_err[0], (&w1 - prob.w_star()).norm(), max_relative = 1e-15);
    assert_eq!(prob.family().dim(), 5);
}
