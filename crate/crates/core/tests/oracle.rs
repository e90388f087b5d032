use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ssmgd_core::oracle::*;
use ssmgd_core::Error;

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[test]
fn identity_operator_returns_the_point() {
    let fam = QuadraticFamily::new(vec![DMatrix::identity(3, 3)], vec![DVector::zeros(3)]).unwrap();
    let w = dv(&[1.0, -2.0, 0.5]);
    assert_eq!(fam.gradient(0, &w).unwrap(), w);
    assert!(matches!(fam.gradient(0, &dv(&[1.0])), Err(Error::DimensionMismatch { .. })));
    assert!(fam.gradient(1, &w).is_err());
}

#[test]
fn minimizer_examples() {
    let fam = QuadraticFamily::new(vec![DMatrix::identity(2, 2) * 2.0], vec![dv(&[-2.0, 0.0])]).unwrap();
    let w = minimizer(&fam, &[1.0]).unwrap();
    assert_relative_eq!(w, dv(&[1.0, 0.0]), epsilon = 1e-14);

    let fam = QuadraticFamily::new(vec![DMatrix::identity(1, 1); 2], vec![dv(&[1.0]), dv(&[-1.0])]).unwrap();
    assert_eq!(minimizer(&fam, &[0.5, 0.5]).unwrap()[0], 0.0);

    let kern = build_kernel_family(10, 0.2, 0.1, LabelRule::Zero, 0).unwrap();
    let c = kernel_minimizer(&kern, &[0.1; 10]).unwrap();
    assert!(c.iter().all(|&x| x == 0.0));
}

#[test]
fn rejects_invalid_operators() {
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(QuadraticFamily::new(vec![asym], vec![DVector::zeros(2)]).is_err());
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(QuadraticFamily::new(vec![indefinite], vec![DVector::zeros(2)]).is_err());
}

#[test]
fn kernel_certificate() {
    let kern = build_kernel_family(10, 0.2, 0.1, LabelRule::Sine { noise: 0.1 }, 3).unwrap();
    assert!((0..10).all(|i| kern.gram()[(i, i)] == 1.0));
    let cert = certify_kernel(&kern, &[0.1; 10]).unwrap();
    assert_relative_eq!(cert.kappa, 0.1, max_relative = 1e-15);
    assert_relative_eq!(cert.eta, 1.1, max_relative = 1e-15);
    assert_relative_eq!(cert.alpha, 1.0 / 11.0, max_relative = 1e-14);
}

/// Each `A(z)` is rank one plus `λI`; in the Gram geometry its eigenvalues are
/// `λ` and `K(x,x) + λ`. Check via the generalized problem `G A v = μ G v`.
#[test]
fn kernel_operator_spectrum() {
    let kern = build_kernel_family(6, 0.3, 0.1, LabelRule::Zero, 0).unwrap();
    let m = 6;
    for z in 0..m {
        let mut a = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut col = DVector::zeros(m);
            let mut e = DVector::zeros(m);
            e[j] = 1.0;
            kern.apply_operator(z, &e, &mut col);
            a.set_column(j, &col);
        }
        // eigenvalues of A itself coincide with those of the self-adjoint operator
        let ev = a.complex_eigenvalues();
        let mut re: Vec<f64> = ev.iter().map(|c| c.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 0.1).abs() < 1e-10);
        assert!((re[m - 1] - 1.1).abs() < 1e-10);
    }
}

#[test]
fn noiseless_family() {
    let wc = dv(&[0.3, -1.2, 2.0]);
    let base = build_random_quadratic(3, 4, 0.5, 2.0, 0.0, 5).unwrap();
    let offsets = base.operators().iter().map(|a| -(a * &wc)).collect();
    let fam = QuadraticFamily::new(base.operators().to_vec(), offsets).unwrap();
    let rho = [0.1, 0.2, 0.3, 0.4];
    assert_relative_eq!(minimizer(&fam, &rho).unwrap(), wc.clone(), epsilon = 1e-12);
    assert!(certify(&fam, &rho).unwrap().sigma2 < 1e-24);
}

#[test]
fn random_quadratic_examples() {
    let rho = [0.125; 8];
    let fam = build_random_quadratic(5, 8, 0.5, 2.0, 1.0, 99).unwrap();
    let cert = certify(&fam, &rho).unwrap();
    assert!((cert.kappa - 0.5).abs() < 1e-9);
    assert!((cert.eta - 2.0).abs() < 1e-9);
    assert!((cert.alpha - 0.25).abs() < 1e-9);
    assert!(cert.mean_gradient_norm < 1e-10);

    let quiet = build_random_quadratic(5, 8, 0.5, 2.0, 0.0, 99).unwrap();
    assert_eq!(certify(&quiet, &rho).unwrap().sigma2, 0.0);
    assert_eq!(build_random_quadratic(5, 8, 0.5, 2.0, 1.0, 99).unwrap(), fam);
    assert_ne!(build_random_quadratic(5, 8, 0.5, 2.0, 1.0, 100).unwrap(), fam);
}

#[test]
fn norm_examples() {
    let fam = build_random_quadratic(2, 1, 1.0, 1.0, 0.0, 0).unwrap();
    assert_relative_eq!(fam.norm(&dv(&[3.0, 4.0])).unwrap(), 5.0, max_relative = 1e-15);
    let kern = build_kernel_family(5, 0.3, 0.1, LabelRule::Zero, 0).unwrap();
    let mut e = DVector::zeros(5);
    e[2] = 1.0;
    assert_relative_eq!(kern.norm(&e).unwrap(), 1.0, max_relative = 1e-15);
    assert_eq!(kern.norm(&DVector::zeros(5)).unwrap(), 0.0);
}

#[test]
fn family_json_round_trip() {
    let fams = [
        Family::Quadratic(build_random_quadratic(3, 2, 0.5, 2.0, 1.0, 1).unwrap()),
        Family::Kernel(build_kernel_family(7, 0.2, 0.05, LabelRule::Sine { noise: 0.2 }, 4).unwrap()),
    ];
    for f in fams {
        let back = Family::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
    }
}

/// Gradient of `V_z(f) = ½((f(x) − y)² + λ‖f‖²)` as a function, evaluated
/// pointwise from kernel sums: `(f(x_z) − y) K(x_z, s) + λ f(s)`.
fn brute_force_gradient_at(kern: &KernelFamily, z: usize, c: &DVector<f64>, s: f64) -> f64 {
    let grid = kern.grid();
    let h = kern.bandwidth();
    let f = |x: f64| grid.iter().zip(c.iter()).map(|(&g, &cj)| cj * gaussian_kernel(g, x, h)).sum::<f64>();
    let st = kern.states()[z];
    let xz = grid[st.point];
    (f(xz) - st.label) * gaussian_kernel(xz, s, h) + kern.lambda() * f(s)
}

#[test]
fn kernel_gradient_matches_brute_force_functional_gradient() {
    for m in [3usize, 8, 20] {
        let kern = build_kernel_family(m, 0.15, 0.07, LabelRule::Sine { noise: 0.3 }, m as u64).unwrap();
        let c = DVector::from_fn(m, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let probes: Vec<f64> = (0..=40).map(|i| -0.2 + 1.4 * i as f64 / 40.0).collect();
        for z in 0..m {
            let g = kern.gradient(z, &c).unwrap();
            for &s in &probes {
                let via_coeffs: f64 = kern
                    .grid()
                    .iter()
                    .zip(g.iter())
                    .map(|(&x, &gj)| gj * gaussian_kernel(x, s, kern.bandwidth()))
                    .sum();
                let brute = brute_force_gradient_at(&kern, z, &c, s);
                assert!((via_coeffs - brute).abs() <= 1e-10 * brute.abs().max(1.0), "m={m} z={z} s={s}");
            }
        }
    }
}

fn finite_difference_check<F: GradientOracle>(fam: &F, z: usize, w: &DVector<f64>, h: &DVector<f64>) -> f64 {
    let eps = 1e-5;
    let fd = (fam.potential(z, &(w + h * eps)) - fam.potential(z, &(w - h * eps))) / (2.0 * eps);
    let analytic = fam.inner(&fam.gradient(z, w).unwrap(), h);
    (fd - analytic).abs() / analytic.abs().max(1.0)
}

proptest! {
    #[test]
    fn quadratic_gradients_are_affine(seed: u64, s in -3.0f64..3.0,
                                      a in prop::collection::vec(-2.0f64..2.0, 4),
                                      b in prop::collection::vec(-2.0f64..2.0, 4)) {
        let fam = build_random_quadratic(4, 3, 0.3, 3.0, 1.0, seed).unwrap();
        let (u, v) = (dv(&a), dv(&b));
        for z in 0..3 {
            let lhs = fam.gradient(z, &(&u * s + &v * (1.0 - s))).unwrap();
            let rhs = fam.gradient(z, &u).unwrap() * s + fam.gradient(z, &v).unwrap() * (1.0 - s);
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }
    }

    #[test]
    fn quadratic_finite_differences(seed: u64, a in prop::collection::vec(-2.0f64..2.0, 4),
                                    b in prop::collection::vec(-1.0f64..1.0, 4)) {
        let fam = build_random_quadratic(4, 3, 0.3, 3.0, 1.0, seed).unwrap();
        for z in 0..3 {
            prop_assert!(finite_difference_check(&fam, z, &dv(&a), &dv(&b)) < 1e-6);
        }
    }

    #[test]
    fn kernel_finite_differences(seed: u64, a in prop::collection::vec(-2.0f64..2.0, 6),
                                 b in prop::collection::vec(-1.0f64..1.0, 6)) {
        let kern = build_kernel_family(6, 0.25, 0.1, LabelRule::Sine { noise: 0.2 }, seed).unwrap();
        for z in 0..6 {
            prop_assert!(finite_difference_check(&kern, z, &dv(&a), &dv(&b)) < 1e-6);
        }
    }

    #[test]
    fn mean_gradient_vanishes_at_minimizer(seed: u64, w in prop::collection::vec(0.05f64..1.0, 3)) {
        let total: f64 = w.iter().sum();
        let rho: Vec<f64> = w.iter().map(|x| x / total).collect();
        let fam = build_random_quadratic(4, 3, 0.3, 3.0, 1.0, seed).unwrap();
        let ws = minimizer(&fam, &rho).unwrap();
        let mut mean = DVector::zeros(4);
        for (z, &r) in rho.iter().enumerate() {
            mean += fam.gradient(z, &ws).unwrap() * r;
        }
        prop_assert!(mean.amax() < 1e-10);
    }
}
