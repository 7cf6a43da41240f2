use num_complex::Complex64;
use proptest::prelude::*;

use pt_vortex::dynamics::{add_noise, evolve_with, track_vortex};
use pt_vortex::observables::{current_density, winding_number};
use pt_vortex::stationary::{solve_branch_point, SolverOptions};
use pt_vortex::{
    build_basis, evolve, offcenter_vortex, ComplexField, Error, GridSpec, PotentialSpec, PropagationConfig,
};

fn config(grid: GridSpec, dt: f64, n_steps: usize) -> PropagationConfig {
    PropagationConfig { dt, n_steps, grid, record_every: n_steps.max(1), ..Default::default() }
}

/// Coherent state of `-lap + r^2`: the density is a unit Gaussian whose
/// center follows `x0 cos 2t`.
#[test]
fn displaced_gaussian_follows_classical_orbit() {
    let grid = GridSpec::extended();
    let x0 = 1.5;
    let psi = ComplexField::from_fn(grid, |x, y| Complex64::new((-((x - x0).powi(2) + y * y) / 2.0).exp(), 0.0)).normalized();
    let t: f64 = 0.6;
    let ev = evolve(&psi, &config(grid, 1e-3, 600), 0.0, &PotentialSpec::a(0.0)).unwrap();
    let xc = x0 * (2.0 * t).cos();
    let pi = std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for (idx, (_, _, x, y)) in grid.points().enumerate() {
        let exact = (-((x - xc).powi(2) + y * y)).exp() / pi;
        worst = worst.max((ev.final_state.data[idx].norm_sqr() - exact).abs());
    }
    assert!(worst < 1e-6, "density error {worst}");
}

#[test]
fn norm_is_conserved_without_gain_or_loss() {
    let grid = GridSpec::standard();
    let psi = offcenter_vortex(0.4, -0.1, grid);
    let ev = evolve(&psi, &config(grid, 1e-3, 1000), 2.0, &PotentialSpec::c(1.0, 0.0)).unwrap();
    let drift = (ev.trajectory.norms.last().unwrap() - 1.0).abs();
    assert!(drift < 1e-10, "drift {drift}");
}

#[test]
fn stationary_state_keeps_its_shape_and_norm() {
    let b = build_basis(11, GridSpec::basis_default()).unwrap();
    let spec = PotentialSpec::a(1.0);
    let s = solve_branch_point(pt_vortex::BranchLabel::VortexPlus, 1.0, &spec, &b, &SolverOptions::default()).unwrap();
    let grid = GridSpec::standard();
    let psi = b.sample_on(&s.coeffs, grid).unwrap().normalized();
    let ev = evolve(&psi, &config(grid, 1e-3, 1000), 1.0, &spec).unwrap();
    let t = ev.trajectory;
    assert!(*t.overlaps.last().unwrap() > 1.0 - 1e-5, "overlap {}", t.overlaps.last().unwrap());
    assert!((t.norms.last().unwrap() - 1.0).abs() < 1e-4);
    // global phase advances as exp(-i mu t)
    let z = psi.inner(&ev.final_state).unwrap();
    let expected = Complex64::from_polar(1.0, -s.mu.re * 1.0);
    assert!((z / z.norm() - expected).norm() < 1e-3, "phase {z} vs {expected}");
}

#[test]
fn same_seed_same_run() {
    let grid = GridSpec::standard();
    let psi = offcenter_vortex(0.2, 0.2, grid);
    let cfg = PropagationConfig { noise_amplitude: 1e-2, seed: 11, n_steps: 50, record_every: 10, grid, ..Default::default() };
    let spec = PotentialSpec::c(1.0, 0.5);
    let a = evolve(&psi, &cfg, 1.0, &spec).unwrap();
    let b = evolve(&psi, &cfg, 1.0, &spec).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.trajectory.overlaps, b.trajectory.overlaps);
    let c = evolve(&psi, &PropagationConfig { seed: 12, ..cfg.clone() }, 1.0, &spec).unwrap();
    assert_ne!(a.final_state, c.final_state);
}

#[test]
fn blow_up_reports_step() {
    let grid = GridSpec::standard();
    let psi = offcenter_vortex(0.2, 0.2, grid);
    let spec = PotentialSpec::a(1e300);
    let err = evolve(&psi, &config(grid, 1e-3, 5), 0.0, &spec).unwrap_err();
    assert!(matches!(err, Error::BlowUp { step: 1 }), "{err:?}");
}

#[test]
fn zero_steps_records_initial_state_once() {
    let grid = GridSpec::standard();
    let psi = offcenter_vortex(0.2, 0.2, grid);
    let mut seen = Vec::new();
    let ev = evolve_with(&psi, &config(grid, 1e-3, 0), 1.0, &PotentialSpec::a(0.0), |step, _, _| {
        seen.push(step);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![0]);
    assert_eq!(ev.steps_taken, 0);
}

#[test]
fn tracker_finds_displaced_core() {
    let grid = GridSpec::standard();
    let psi = offcenter_vortex(0.3, -0.45, grid);
    let (x, y) = track_vortex(&psi, None).unwrap();
    assert!((x - 0.3).abs() < 0.02 && (y + 0.45).abs() < 0.02, "({x}, {y})");
    let ground = ComplexField::from_fn(grid, |x, y| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0));
    assert!(matches!(track_vortex(&ground, None), Err(Error::LostVortex(_))));
}

#[test]
fn conjugation_reverses_current() {
    let psi = offcenter_vortex(0.3, 0.1, GridSpec::basis_default());
    let j = current_density(&psi);
    let jc = current_density(&psi.conj());
    for k in 0..j.jx.data.len() {
        assert!((j.jx.data[k] + jc.jx.data[k]).abs() < 1e-12);
        assert!((j.jy.data[k] + jc.jy.data[k]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noise_keeps_norm(amp in 0.0f64..0.1, seed in any::<u64>()) {
        let mut psi = offcenter_vortex(0.1, 0.1, GridSpec::standard());
        let before = psi.norm_sqr();
        add_noise(&mut psi, amp, seed);
        prop_assert!((psi.norm_sqr() - before).abs() < 1e-12);
    }

    #[test]
    fn winding_independent_of_radius(r in 0.3f64..3.0, x0 in -0.2f64..0.2, y0 in -0.2f64..0.2) {
        let psi = offcenter_vortex(x0, y0, GridSpec::standard());
        prop_assert_eq!(winding_number(&psi, (x0, y0), r).unwrap(), 1);
        prop_assert_eq!(winding_number(&psi.conj(), (x0, y0), r).unwrap(), -1);
    }
}
