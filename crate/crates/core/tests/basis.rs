use num_complex::Complex64;
use proptest::prelude::*;

use pt_vortex::basis::state_count;
use pt_vortex::{build_basis, hermite_function, ComplexField, Error, GridSpec};

/// Direct formula `H_n(x) e^{-x^2/2} / sqrt(2^n n! sqrt(pi))` with the
/// polynomial from its explicit sum, for small `n`.
fn hermite_direct(n: usize, x: f64) -> f64 {
    let mut h = 0.0;
    for m in 0..=n / 2 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let num = factorial(n) / (factorial(m) * factorial(n - 2 * m));
        h += sign * num * (2.0 * x).powi((n - 2 * m) as i32);
    }
    let norm = (2f64.powi(n as i32) * factorial(n) * std::f64::consts::PI.sqrt()).sqrt();
    h * (-x * x / 2.0).exp() / norm
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn recurrence_matches_explicit_polynomials() {
    for n in 0..=10 {
        for &x in &[-3.1, -1.0, -0.2, 0.0, 0.7, 2.5] {
            let a = hermite_function(n, x).unwrap();
            let b = hermite_direct(n, x);
            assert!((a - b).abs() < 1e-12, "n = {n}, x = {x}: {a} vs {b}");
        }
    }
}

#[test]
fn coarse_grid_is_rejected() {
    let coarse = GridSpec::square(8.0, 32).unwrap();
    assert!(matches!(build_basis(20, coarse), Err(Error::Nyquist { .. })));
    assert!(matches!(hermite_function(65, 0.1), Err(Error::HermiteOrder(65))));
}

#[test]
fn even_part_of_odd_function_vanishes() {
    let b = build_basis(8, GridSpec::basis_default()).unwrap();
    let f = ComplexField::from_fn(*b.grid(), |x, y| Complex64::new(x * (1.0 + y * y) * (-(x * x + y * y)).exp(), 0.0));
    let c = b.grid_to_coeffs(&f).unwrap();
    for (&(nx, _), z) in b.states().iter().zip(&c) {
        if nx % 2 == 0 {
            assert!(z.norm() < 1e-12, "({nx}) coefficient {z}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parity(n in 0usize..40, x in -6.0f64..6.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let a = hermite_function(n, -x).unwrap();
        let b = sign * hermite_function(n, x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn triangular_count(n in 0usize..30) {
        prop_assert_eq!(state_count(n), (n + 1) * (n + 2) / 2);
    }

    #[test]
    fn round_trip(seed in prop::collection::vec(-1.0f64..1.0, 2 * 28)) {
        let b = build_basis(6, GridSpec::basis_default()).unwrap();
        let c: Vec<Complex64> = seed.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let back = b.grid_to_coeffs(&b.coeffs_to_grid(&c).unwrap()).unwrap();
        let err = c.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "round trip error {err}");
    }

    #[test]
    fn projection_contracts(a in 0.3f64..2.0, x0 in -1.5f64..1.5, k in -3.0f64..3.0) {
        let b = build_basis(6, GridSpec::basis_default()).unwrap();
        let f = ComplexField::from_fn(*b.grid(), |x, y| Complex64::from_polar((-a * ((x - x0).powi(2) + y * y)).exp(), k * y));
        let c = b.grid_to_coeffs(&f).unwrap();
        let coeff_norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(coeff_norm <= f.norm_sqr() * (1.0 + 1e-10));
    }
}
