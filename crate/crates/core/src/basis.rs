//! Truncated 2D harmonic-oscillator product basis.
//!
//! States are `h_{n_x}(x) h_{n_y}(y)` with `n_x + n_y <= n_max`, ordered by
//! total degree and then by ascending `n_x`:
//! `(0,0), (0,1), (1,0), (0,2), (1,1), (2,0), ...`.
//! Every inner product is the trapezoidal sum on the basis grid. All
//! transforms are separable, so they cost `O(n_max * N^2)` instead of
//! `O(N_states * N^2)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, Wavefunction};

pub const MAX_HERMITE_ORDER: usize = 64;

/// Orthonormal Hermite function `h_n(x)` by the normalized three-term recurrence.
pub fn hermite_function(n: usize, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_ORDER {
        return Err(Error::HermiteOrder(n));
    }
    Ok(*hermite_column(n, x).last().expect("at least h_0"))
}

/// `[h_0(x), ..., h_n(x)]`.
fn hermite_column(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if n >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * h0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Table `t[n][i] = h_n(xs[i])`.
fn hermite_table(n_max: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; xs.len()]; n_max + 1];
    for (i, &x) in xs.iter().enumerate() {
        for (n, v) in hermite_column(n_max, x).into_iter().enumerate() {
            table[n][i] = v;
        }
    }
    table
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    n_max: usize,
    states: Vec<(usize, usize)>,
    grid: GridSpec,
    hx: Vec<Vec<f64>>,
    hy: Vec<Vec<f64>>,
    /// `slot[n_x][n_y]` is the state index, or `usize::MAX` outside the truncation.
    slot: Vec<Vec<usize>>,
}

/// Number of states with `n_x + n_y <= n_max`.
pub fn state_count(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

pub fn build_basis(n_max: usize, grid: GridSpec) -> Result<BasisSet> {
    BasisSet::new(n_max, grid)
}

impl BasisSet {
    pub fn new(n_max: usize, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        if n_max > MAX_HERMITE_ORDER {
            return Err(Error::HermiteOrder(n_max));
        }
        // The fastest local oscillation of h_n has wavenumber sqrt(2n+1);
        // keep at least four samples per local half wavelength.
        let limit = std::f64::consts::FRAC_PI_2 / (2.0 * n_max as f64 + 1.0).sqrt();
        let spacing = grid.dx().max(grid.dy());
        if spacing >= limit {
            return Err(Error::Nyquist { n_max, spacing, limit });
        }

        let mut states = Vec::with_capacity(state_count(n_max));
        let mut slot = vec![vec![usize::MAX; n_max + 1]; n_max + 1];
        for total in 0..=n_max {
            for nx in 0..=total {
                slot[nx][total - nx] = states.len();
                states.push((nx, total - nx));
            }
        }
        Ok(Self {
            n_max,
            states,
            grid,
            hx: hermite_table(n_max, &grid.xs()),
            hy: hermite_table(n_max, &grid.ys()),
            slot,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn index_of(&self, nx: usize, ny: usize) -> Option<usize> {
        if nx + ny > self.n_max {
            return None;
        }
        Some(self.slot[nx][ny])
    }

    /// Oscillator levels `2 (n_x + n_y + 1)`, the diagonal of `-lap + x^2 + y^2`.
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|&(a, b)| 2.0 * (a + b + 1) as f64).collect()
    }

    /// Trapezoidal weight of every grid point.
    pub fn quad_weight(&self) -> f64 {
        self.grid.cell_area()
    }

    /// Dense `N_grid x N_states` matrix of basis functions on the grid.
    pub fn eval_matrix(&self) -> DMatrix<f64> {
        let g = &self.grid;
        DMatrix::from_fn(g.len(), self.len(), |p, k| {
            let (i, j) = (p % g.n_x, p / g.n_x);
            let (a, b) = self.states[k];
            self.hx[a][i] * self.hy[b][j]
        })
    }

    /// Quadrature Gram matrix; the identity for an adequate grid.
    pub fn gram(&self) -> DMatrix<f64> {
        let ones = vec![Complex64::new(1.0, 0.0); self.grid.len()];
        self.weighted_matrix(&ones).map(|z| z.re)
    }

    /// Largest entry of `|Gram - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let n = self.len();
        let mut err: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                err = err.max((g[(r, c)] - target).abs());
            }
        }
        err
    }

    fn check_len(&self, c: &[Complex64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: c.len() });
        }
        Ok(())
    }

    /// Quadrature projections `c_k = <h_k|psi>`.
    pub fn grid_to_coeffs(&self, psi: &Wavefunction) -> Result<Vec<Complex64>> {
        if !psi.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self.project(&psi.data))
    }

    /// Projection of raw samples in storage order onto the basis.
    pub fn project(&self, values: &[Complex64]) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        let m = self.n_max + 1;
        // t[a][j] = sum_i f(i, j) h_a(x_i)
        let mut t = vec![vec![Complex64::new(0.0, 0.0); ny]; m];
        for j in 0..ny {
            let row = &values[j * nx..(j + 1) * nx];
            for (ta, h) in t.iter_mut().zip(&self.hx) {
                ta[j] = row.iter().zip(h).map(|(v, &hv)| v * hv).sum();
            }
        }
        let w = self.quad_weight();
        self.states
            .iter()
            .map(|&(a, b)| {
                let h = &self.hy[b];
                let s: Complex64 = t[a].iter().zip(h).map(|(v, &hb)| v * hb).sum();
                s * w
            })
            .collect()
    }

    /// Reconstruct `psi(x_i, y_j) = sum_k c_k h_{n_x}(x_i) h_{n_y}(y_j)` on the basis grid.
    pub fn coeffs_to_grid(&self, c: &[Complex64]) -> Result<Wavefunction> {
        self.check_len(c)?;
        Ok(self.synthesize(c, &self.hx, &self.hy, self.grid))
    }

    /// Evaluate a coefficient vector on an arbitrary grid.
    pub fn sample_on(&self, c: &[Complex64], grid: GridSpec) -> Result<Wavefunction> {
        self.check_len(c)?;
        grid.validate()?;
        if grid.same_as(&self.grid) {
            return self.coeffs_to_grid(c);
        }
        let hx = hermite_table(self.n_max, &grid.xs());
        let hy = hermite_table(self.n_max, &grid.ys());
        Ok(self.synthesize(c, &hx, &hy, grid))
    }

    fn synthesize(&self, c: &[Complex64], hx: &[Vec<f64>], hy: &[Vec<f64>], grid: GridSpec) -> Wavefunction {
        let (nx, ny) = (grid.n_x, grid.n_y);
        let m = self.n_max + 1;
        // u[b][i] = sum_a c_(a,b) h_a(x_i)
        let mut u = vec![vec![Complex64::new(0.0, 0.0); nx]; m];
        for (k, &(a, b)) in self.states.iter().enumerate() {
            if c[k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let h = &hx[a];
            for i in 0..nx {
                u[b][i] += c[k] * h[i];
            }
        }
        let mut data = vec![Complex64::new(0.0, 0.0); nx * ny];
        for j in 0..ny {
            let row = &mut data[j * nx..(j + 1) * nx];
            for b in 0..m {
                let hb = hy[b][j];
                if hb == 0.0 {
                    continue;
                }
                for i in 0..nx {
                    row[i] += u[b][i] * hb;
                }
            }
        }
        ComplexField { grid, data }
    }

    /// Matrix elements `M_kl = <h_k| w |h_l>` of a multiplicative operator
    /// sampled on the basis grid. Symmetric because the basis is real.
    pub fn weighted_matrix(&self, w: &[Complex64]) -> DMatrix<Complex64> {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        let m = self.n_max + 1;
        // t[a][c][j] = sum_i w(i, j) h_a(x_i) h_c(x_i), for a <= c
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |c| (a, c))).collect();
        let t: Vec<Vec<Complex64>> = pairs
            .par_iter()
            .map(|&(a, c)| {
                let prod: Vec<f64> = self.hx[a].iter().zip(&self.hx[c]).map(|(p, q)| p * q).collect();
                (0..ny)
                    .map(|j| {
                        let row = &w[j * nx..(j + 1) * nx];
                        row.iter().zip(&prod).map(|(v, &p)| v * p).sum()
                    })
                    .collect()
            })
            .collect();
        let mut lookup = vec![vec![0usize; m]; m];
        for (idx, &(a, c)) in pairs.iter().enumerate() {
            lookup[a][c] = idx;
            lookup[c][a] = idx;
        }

        let n = self.len();
        let wq = self.quad_weight();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let (a, b) = self.states[k];
                let hb = &self.hy[b];
                (0..n)
                    .map(|l| {
                        if l < k {
                            return Complex64::new(0.0, 0.0);
                        }
                        let (c, d) = self.states[l];
                        let tac = &t[lookup[a][c]];
                        let hd = &self.hy[d];
                        let mut s = Complex64::new(0.0, 0.0);
                        for j in 0..ny {
                            s += tac[j] * (hb[j] * hd[j]);
                        }
                        s * wq
                    })
                    .collect()
            })
            .collect();
        let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for k in 0..n {
            for l in k..n {
                out[(k, l)] = rows[k][l];
                out[(l, k)] = rows[k][l];
            }
        }
        out
    }
}
