//! Density, phase, probability current and derived quantities of a field.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral, Wavefunction};
use crate::potential::PotentialSpec;

/// Probability current `j = i (psi grad psi* - psi* grad psi) = 2 Im(psi* grad psi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    pub jx: ScalarField,
    pub jy: ScalarField,
}

pub fn density_field(psi: &Wavefunction) -> ScalarField {
    ScalarField { grid: psi.grid, data: psi.data.iter().map(|z| z.norm_sqr()).collect() }
}

/// Phase in `(-pi, pi]`.
pub fn phase_field(psi: &Wavefunction) -> ScalarField {
    let data = psi
        .data
        .iter()
        .map(|z| {
            let a = z.arg();
            if a <= -PI {
                a + 2.0 * PI
            } else {
                a
            }
        })
        .collect();
    ScalarField { grid: psi.grid, data }
}

pub fn current_density(psi: &Wavefunction) -> CurrentField {
    current_with(&Spectral::new(psi.grid), psi)
}

/// [`current_density`] with a caller-owned FFT plan.
pub fn current_with(spectral: &Spectral, psi: &Wavefunction) -> CurrentField {
    let (dx, dy) = spectral.gradient(&psi.data);
    let j = |d: &[Complex64]| -> Vec<f64> { psi.data.iter().zip(d).map(|(p, q)| 2.0 * (p.conj() * q).im).collect() };
    CurrentField {
        jx: ScalarField { grid: psi.grid, data: j(&dx) },
        jy: ScalarField { grid: psi.grid, data: j(&dy) },
    }
}

/// `integral j . e_phi` over the grid with the origin sample left out.
pub fn azimuthal_current(psi: &Wavefunction) -> f64 {
    azimuthal_current_of(&current_density(psi))
}

pub fn azimuthal_current_of(current: &CurrentField) -> f64 {
    let g = current.jx.grid;
    let mut sum = 0.0;
    for (idx, (_, _, x, y)) in g.points().enumerate() {
        let r = x.hypot(y);
        if r < 1e-12 {
            continue;
        }
        sum += (-current.jx.data[idx] * y + current.jy.data[idx] * x) / r;
    }
    sum * g.cell_area()
}

/// Bilinear interpolation of a periodic field at `(x, y)`.
pub fn interpolate(psi: &Wavefunction, x: f64, y: f64) -> Complex64 {
    let g = psi.grid;
    let fx = (x - g.x_min) / g.dx();
    let fy = (y - g.y_min) / g.dy();
    let (i0, j0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - i0, fy - j0);
    let wrap = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
    let (i0, j0) = (wrap(i0, g.n_x), wrap(j0, g.n_y));
    let (i1, j1) = ((i0 + 1) % g.n_x, (j0 + 1) % g.n_y);
    psi.at(i0, j0) * ((1.0 - tx) * (1.0 - ty))
        + psi.at(i1, j0) * (tx * (1.0 - ty))
        + psi.at(i0, j1) * ((1.0 - tx) * ty)
        + psi.at(i1, j1) * (tx * ty)
}

/// Net phase winding of `psi` around a circle, as an integer.
pub fn winding_number(psi: &Wavefunction, center: (f64, f64), radius: f64) -> Result<i32> {
    let g = psi.grid;
    if !(radius > 0.0)
        || center.0 - radius < g.x_min
        || center.0 + radius > g.x_max
        || center.1 - radius < g.y_min
        || center.1 + radius > g.y_max
    {
        return Err(Error::InvalidGrid(format!("loop of radius {radius} around {center:?} leaves the grid")));
    }
    let samples = ((2.0 * PI * radius / g.dx().min(g.dy())) * 8.0).ceil().max(64.0) as usize;
    let loop_values: Vec<Complex64> = (0..samples)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / samples as f64;
            interpolate(psi, center.0 + radius * t.cos(), center.1 + radius * t.sin())
        })
        .collect();
    let smallest = loop_values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if smallest < 1e-6 {
        return Err(Error::AmplitudeTooSmall(smallest));
    }
    let mut total = 0.0;
    for k in 0..samples {
        let a = loop_values[k];
        let b = loop_values[(k + 1) % samples];
        total += (b * a.conj()).arg();
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// `div j - 2 rho Im V`; vanishes for stationary states with real `mu`.
pub fn continuity_residual(psi: &Wavefunction, spec: &PotentialSpec) -> Result<ScalarField> {
    let spectral = Spectral::new(psi.grid);
    let current = current_with(&spectral, psi);
    let div = spectral.divergence(&current.jx.data, &current.jy.data);
    let im_v = spec.sample_imag(&psi.grid)?;
    let data = div
        .iter()
        .zip(&psi.data)
        .zip(&im_v)
        .map(|((d, p), v)| d - 2.0 * p.norm_sqr() * v)
        .collect();
    Ok(ScalarField { grid: psi.grid, data })
}
