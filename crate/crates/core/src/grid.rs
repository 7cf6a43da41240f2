//! Uniform periodic grids and the complex/real fields sampled on them.
//!
//! Sample `i` along an axis sits at `min + i * spacing` with
//! `spacing = (max - min) / n`, so the grid contains the origin and the
//! point `max` is the periodic image of `min`. Fields are stored row-major
//! with `y` as the outer index.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n_x: usize, n_y: usize) -> Result<Self> {
        let grid = Self { x_min, x_max, y_min, y_max, n_x, n_y };
        grid.validate()?;
        Ok(grid)
    }

    /// Square grid `[-half_width, half_width]^2` with `points` samples per axis.
    pub fn square(half_width: f64, points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, -half_width, half_width, points, points)
    }

    /// `[-5, 5]^2` with 128 points per axis, used for real-time propagation.
    pub fn standard() -> Self {
        Self::square(5.0, 128).expect("standard grid is valid")
    }

    /// Doubled range `[-10, 10]^2` with 256 points per axis for strong gain-loss runs.
    pub fn extended() -> Self {
        Self::square(10.0, 256).expect("extended grid is valid")
    }

    /// Quadrature grid of the oscillator basis. Wide enough that the Hermite
    /// functions up to n = 11 are orthonormal to 1e-13 under the trapezoidal rule.
    pub fn basis_default() -> Self {
        Self::square(8.0, 128).expect("basis grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (axis, n) in [("n_x", self.n_x), ("n_y", self.n_y)] {
            if n < 4 || !n.is_power_of_two() {
                problems.push(format!("{axis} = {n} must be a power of two >= 4"));
            }
        }
        for (axis, lo, hi) in [("x", self.x_min, self.x_max), ("y", self.y_min, self.y_max)] {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                problems.push(format!("{axis} range [{lo}, {hi}] is empty or not finite"));
            } else if (lo + hi).abs() > 1e-12 * (hi - lo) {
                problems.push(format!("{axis} range [{lo}, {hi}] is not symmetric about the origin"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGrid(problems.join("; ")))
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.n_y as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.n_y).map(|j| self.y(j)).collect()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    /// Index of the sample at `-x_i` (periodic wrap for `i = 0`).
    #[inline]
    pub fn mirror_x(&self, i: usize) -> usize {
        (self.n_x - i) % self.n_x
    }

    #[inline]
    pub fn mirror_y(&self, j: usize) -> usize {
        (self.n_y - j) % self.n_y
    }

    /// Iterator over `(i, j, x, y)` in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n_y).flat_map(move |j| (0..self.n_x).map(move |i| (i, j, self.x(i), self.y(j))))
    }

    /// Grid cell nearest to `(x, y)`, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x - self.x_min) / self.dx()).round();
        let fj = ((y - self.y_min) / self.dy()).round();
        let i = fi.clamp(0.0, (self.n_x - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.n_y - 1) as f64) as usize;
        (i, j)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        let tol = 1e-12 * (self.x_max - self.x_min).abs().max(1.0);
        self.n_x == other.n_x
            && self.n_y == other.n_y
            && (self.x_min - other.x_min).abs() < tol
            && (self.x_max - other.x_max).abs() < tol
            && (self.y_min - other.y_min).abs() < tol
            && (self.y_max - other.y_max).abs() < tol
    }
}

/// Complex field on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

/// Condensate wavefunction sampled on a grid.
pub type Wavefunction = ComplexField;

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), found: data.len() });
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let data = grid.points().map(|(_, _, x, y)| f(x, y)).collect();
        Self { grid, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.index(i, j)]
    }

    /// `integral |psi|^2` by the trapezoidal rule.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.data.iter_mut().for_each(|z| *z /= n);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `<self|other>` with the conjugate on `self`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_area())
    }

    /// `|<a|b>| / (|a| |b|)`.
    pub fn overlap(&self, other: &ComplexField) -> Result<f64> {
        let ip = self.inner(other)?;
        let denom = (self.norm_sqr() * other.norm_sqr()).sqrt();
        Ok(if denom > 0.0 { ip.norm() / denom } else { 0.0 })
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// The PT image `psi*(-x, y)`.
    pub fn pt_image(&self) -> Self {
        let g = self.grid;
        let mut data = Vec::with_capacity(g.len());
        for j in 0..g.n_y {
            for i in 0..g.n_x {
                data.push(self.data[g.index(g.mirror_x(i), j)].conj());
            }
        }
        Self { grid: g, data }
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Real field on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// 2D FFT plans plus the angular wavenumbers of a grid.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    fx: Arc<dyn Fft<f64>>,
    fx_inv: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    fy_inv: Arc<dyn Fft<f64>>,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn wavenumbers(n: usize, spacing: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * spacing);
    (0..n)
        .map(|m| {
            let s = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            s * scale
        })
        .collect()
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fx: planner.plan_fft_forward(grid.n_x),
            fx_inv: planner.plan_fft_inverse(grid.n_x),
            fy: planner.plan_fft_forward(grid.n_y),
            fy_inv: planner.plan_fft_inverse(grid.n_y),
            kx: wavenumbers(grid.n_x, grid.dx()),
            ky: wavenumbers(grid.n_y, grid.dy()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fx, &self.fy);
    }

    /// Inverse transform in place, including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fx_inv, &self.fy_inv);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        fx.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = data[j * nx + i];
            }
            fy.process(&mut column);
            for j in 0..ny {
                data[j * nx + i] = column[j];
            }
        }
    }

    /// Spectral derivatives `(d/dx, d/dy)` of a periodic field. The Nyquist
    /// mode is dropped so the operator stays real.
    pub fn gradient(&self, field: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        let mut hat = field.to_vec();
        self.forward(&mut hat);
        let mut gx = hat.clone();
        let mut gy = hat;
        for j in 0..ny {
            let ky = if j == ny / 2 { 0.0 } else { self.ky[j] };
            for i in 0..nx {
                let kx = if i == nx / 2 { 0.0 } else { self.kx[i] };
                let idx = j * nx + i;
                gx[idx] *= Complex64::new(0.0, kx);
                gy[idx] *= Complex64::new(0.0, ky);
            }
        }
        self.inverse(&mut gx);
        self.inverse(&mut gy);
        (gx, gy)
    }

    /// Spectral divergence of a real vector field.
    pub fn divergence(&self, fx: &[f64], fy: &[f64]) -> Vec<f64> {
        let to_c = |v: &[f64]| v.iter().map(|&a| Complex64::new(a, 0.0)).collect::<Vec<_>>();
        let (dfx, _) = self.gradient(&to_c(fx));
        let (_, dfy) = self.gradient(&to_c(fy));
        dfx.iter().zip(&dfy).map(|(a, b)| a.re + b.re).collect()
    }

    /// `|k|^2` in storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        for j in 0..self.grid.n_y {
            for i in 0..self.grid.n_x {
                out.push(self.kx[i] * self.kx[i] + self.ky[j] * self.ky[j]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::square(5.0, 100).is_err());
        assert!(GridSpec::new(-5.0, 4.0, -5.0, 5.0, 64, 64).is_err());
        assert!(GridSpec::new(1.0, -1.0, -1.0, 1.0, 64, 64).is_err());
        assert!(GridSpec::square(5.0, 128).is_ok());
    }

    #[test]
    fn mirror_maps_x_to_minus_x() {
        let g = GridSpec::standard();
        for i in 1..g.n_x {
            assert!((g.x(g.mirror_x(i)) + g.x(i)).abs() < 1e-12);
        }
        assert_eq!(g.x(g.n_x / 2), 0.0);
    }

    #[test]
    fn spectral_derivative_of_gaussian() {
        let g = GridSpec::basis_default();
        let s = Spectral::new(g);
        let f = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        let (gx, gy) = s.gradient(&f.data);
        for (idx, (_, _, x, y)) in g.points().enumerate() {
            let e = (-(x * x + y * y)).exp();
            assert!((gx[idx].re + 2.0 * x * e).abs() < 1e-12);
            assert!((gy[idx].re + 2.0 * y * e).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_round_trip() {
        let g = GridSpec::square(4.0, 16).unwrap();
        let s = Spectral::new(g);
        let f = ComplexField::from_fn(g, |x, y| Complex64::new(x.sin(), y * x));
        let mut d = f.data.clone();
        s.forward(&mut d);
        s.inverse(&mut d);
        let err = d.iter().zip(&f.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }
}
