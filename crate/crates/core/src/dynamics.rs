//! Real-time propagation by symmetric operator splitting.
//!
//! One step of `i psi_t = (-lap + V + g |psi|^2) psi` is
//! `K(dt/2) P(dt) K(dt/2)` with `K(t) = exp(-i k^2 t)` applied in Fourier
//! space. `P` solves the pointwise equation `i psi_t = (V + g |psi|^2) psi`
//! exactly: with `rho0` the density entering the substep and `a = Im V`,
//! `rho(t) = rho0 e^{2 a t}` and the accumulated nonlinear phase is
//! `g rho0 t phi(2 a t)`, `phi(z) = (e^z - 1) / z`. Freezing the density at
//! the start of the whole step instead would drop the scheme to first order
//! whenever `g != 0`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, Spectral, Wavefunction};
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub noise_amplitude: f64,
    pub record_every: usize,
    pub grid: GridSpec,
    pub seed: u64,
    /// Width of an absorbing boundary layer; zero disables it.
    pub absorbing_width: f64,
    pub track_vortex: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 1000,
            noise_amplitude: 0.0,
            record_every: 1,
            grid: GridSpec::standard(),
            seed: 0,
            absorbing_width: 0.0,
            track_vortex: false,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("propagation.dt = {} must be > 0", self.dt));
        }
        if self.record_every == 0 {
            problems.push("propagation.record_every must be >= 1".into());
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            problems.push(format!("propagation.noise_amplitude = {} must be >= 0", self.noise_amplitude));
        }
        if !(self.absorbing_width >= 0.0) {
            problems.push(format!("propagation.absorbing_width = {} must be >= 0", self.absorbing_width));
        }
        if let Err(e) = self.grid.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Reusable split-step propagator for one `(grid, dt, g, potential)`.
pub struct Propagator {
    spectral: Spectral,
    half_kinetic: Vec<Complex64>,
    /// `exp(-i V dt)` per point.
    linear: Vec<Complex64>,
    /// `dt * phi(2 Im V dt)`, the effective time of the nonlinear phase.
    nonlinear_time: Vec<f64>,
    mask: Option<Vec<f64>>,
    g: f64,
    dt: f64,
}

fn phi(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

impl Propagator {
    pub fn new(grid: GridSpec, dt: f64, g: f64, spec: &PotentialSpec) -> Result<Self> {
        Self::with_absorber(grid, dt, g, spec, 0.0)
    }

    pub fn with_absorber(grid: GridSpec, dt: f64, g: f64, spec: &PotentialSpec, absorbing_width: f64) -> Result<Self> {
        grid.validate()?;
        let spectral = Spectral::new(grid);
        let half_kinetic = spectral.k_squared().iter().map(|k2| Complex64::from_polar(1.0, -k2 * dt / 2.0)).collect();
        let v = spec.sample_full(&grid)?;
        let linear = v.iter().map(|v| (Complex64::new(0.0, -dt) * v).exp()).collect();
        let nonlinear_time = v.iter().map(|v| dt * phi(2.0 * v.im * dt)).collect();
        let mask = (absorbing_width > 0.0).then(|| absorbing_mask(&grid, absorbing_width, dt));
        Ok(Self { spectral, half_kinetic, linear, nonlinear_time, mask, g, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &GridSpec {
        self.spectral.grid()
    }

    fn kinetic_half(&self, data: &mut [Complex64]) {
        self.spectral.forward(data);
        data.iter_mut().zip(&self.half_kinetic).for_each(|(z, k)| *z *= k);
        self.spectral.inverse(data);
    }

    /// Advance `psi` by one step in place.
    pub fn step(&self, psi: &mut Wavefunction) {
        self.kinetic_half(&mut psi.data);
        for ((z, lin), tau) in psi.data.iter_mut().zip(&self.linear).zip(&self.nonlinear_time) {
            let rho0 = z.norm_sqr();
            *z *= lin * Complex64::from_polar(1.0, -self.g * rho0 * tau);
        }
        self.kinetic_half(&mut psi.data);
        if let Some(mask) = &self.mask {
            psi.data.iter_mut().zip(mask).for_each(|(z, m)| *z *= m);
        }
    }
}

/// Per-step damping factor that ramps up quadratically inside the boundary layer.
fn absorbing_mask(grid: &GridSpec, width: f64, dt: f64) -> Vec<f64> {
    const STRENGTH: f64 = 20.0;
    let ramp = |v: f64, lo: f64, hi: f64| {
        let depth = ((lo + width - v).max(v - (hi - width))).max(0.0) / width;
        depth.min(1.0)
    };
    grid.points()
        .map(|(_, _, x, y)| {
            let s = ramp(x, grid.x_min, grid.x_max).max(ramp(y, grid.y_min, grid.y_max));
            (-STRENGTH * s * s * dt).exp()
        })
        .collect()
}

/// One symmetric split step.
pub fn split_step(psi: &Wavefunction, dt: f64, g: f64, spec: &PotentialSpec) -> Result<Wavefunction> {
    let prop = Propagator::new(psi.grid, dt, g, spec)?;
    let mut out = psi.clone();
    prop.step(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Vortex core positions; NaN when tracking is off.
    pub centers: Vec<(f64, f64)>,
    pub norms: Vec<f64>,
    pub overlaps: Vec<f64>,
    /// Why the run stopped early, if it did.
    pub truncated: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, center: (f64, f64), norm: f64, overlap: f64) {
        self.times.push(t);
        self.centers.push(center);
        self.norms.push(norm);
        self.overlaps.push(overlap);
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub trajectory: Trajectory,
    pub final_state: Wavefunction,
    pub steps_taken: usize,
}

/// Add independent complex noise of modulus up to `amplitude` per point, then renormalize to the original norm.
pub fn add_noise(psi: &mut Wavefunction, amplitude: f64, seed: u64) {
    if amplitude <= 0.0 {
        return;
    }
    let norm = psi.norm_sqr();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in psi.data.iter_mut() {
        let r: f64 = rng.gen_range(0.0..amplitude);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        *z += Complex64::from_polar(r, theta);
    }
    let scale = (norm / psi.norm_sqr()).sqrt();
    psi.data.iter_mut().for_each(|z| *z *= scale);
}

/// Propagate `psi0` and record observables every `record_every` steps.
/// Overlaps are taken against the noise-free `psi0`.
pub fn evolve(psi0: &Wavefunction, config: &PropagationConfig, g: f64, spec: &PotentialSpec) -> Result<Evolution> {
    evolve_with(psi0, config, g, spec, |_, _, _| Ok(()))
}

/// [`evolve`] with a callback invoked at every recorded step.
pub fn evolve_with(
    psi0: &Wavefunction,
    config: &PropagationConfig,
    g: f64,
    spec: &PotentialSpec,
    mut observer: impl FnMut(usize, f64, &Wavefunction) -> Result<()>,
) -> Result<Evolution> {
    config.validate()?;
    if !psi0.grid.same_as(&config.grid) {
        return Err(Error::GridMismatch);
    }
    let prop = Propagator::with_absorber(config.grid, config.dt, g, spec, config.absorbing_width)?;
    let mut psi = psi0.clone();
    add_noise(&mut psi, config.noise_amplitude, config.seed);

    let mut traj = Trajectory::default();
    let mut center = None;
    let mut record = |step: usize, psi: &Wavefunction, traj: &mut Trajectory, center: &mut Option<(f64, f64)>| -> Result<bool> {
        let t = step as f64 * config.dt;
        let c = if config.track_vortex {
            match track_vortex(psi, *center) {
                Ok(c) => {
                    *center = Some(c);
                    c
                }
                Err(Error::LostVortex(reason)) => {
                    traj.truncated = Some(format!("lost vortex at t = {t:.4}: {reason}"));
                    return Ok(false);
                }
                Err(e) => return Err(e),
            }
        } else {
            (f64::NAN, f64::NAN)
        };
        traj.push(t, c, psi.norm_sqr(), psi0.overlap(psi)?);
        observer(step, t, psi)?;
        Ok(true)
    };

    if !record(0, &psi, &mut traj, &mut center)? {
        return Ok(Evolution { trajectory: traj, final_state: psi, steps_taken: 0 });
    }
    for step in 1..=config.n_steps {
        prop.step(&mut psi);
        if !psi.is_finite() {
            return Err(Error::BlowUp { step });
        }
        if (step % config.record_every == 0 || step == config.n_steps)
            && !record(step, &psi, &mut traj, &mut center)? {
                return Ok(Evolution { trajectory: traj, final_state: psi, steps_taken: step });
            }
    }
    Ok(Evolution { trajectory: traj, final_state: psi, steps_taken: config.n_steps })
}

/// `[(x - x0) + i (y - y0)] e^{-(x^2 + y^2)/2}`, normalized.
pub fn offcenter_vortex(x0: f64, y0: f64, grid: GridSpec) -> Wavefunction {
    ComplexField::from_fn(grid, |x, y| Complex64::new(x - x0, y - y0) * (-(x * x + y * y) / 2.0).exp()).normalized()
}

/// Search radius around the previous core position.
pub const TRACK_RADIUS: f64 = 1.0;
/// A core deeper than this fraction of the density-weighted mean density counts as filled in.
pub const CORE_FILL_FRACTION: f64 = 0.3;
/// A core whose surrounding density is below this fraction of the mean lies outside the cloud.
pub const CLOUD_EDGE_FRACTION: f64 = 0.05;
/// Radius of the disk that defines the density surrounding a core.
pub const SURROUND_RADIUS: f64 = 0.5;

fn disk_mean(rho: &[f64], g: &GridSpec, i: usize, j: usize) -> f64 {
    let ri = (SURROUND_RADIUS / g.dx()).ceil() as i64;
    let rj = (SURROUND_RADIUS / g.dy()).ceil() as i64;
    let (mut sum, mut count) = (0.0, 0usize);
    for b in (j as i64 - rj)..=(j as i64 + rj) {
        for a in (i as i64 - ri)..=(i as i64 + ri) {
            if a < 0 || b < 0 || a >= g.n_x as i64 || b >= g.n_y as i64 {
                continue;
            }
            let (ddx, ddy) = ((a - i as i64) as f64 * g.dx(), (b - j as i64) as f64 * g.dy());
            if ddx.hypot(ddy) <= SURROUND_RADIUS {
                sum += rho[g.index(a as usize, b as usize)];
                count += 1;
            }
        }
    }
    sum / count.max(1) as f64
}

/// Sub-cell position of the vortex core: the deepest density minimum that
/// carries phase winding, refined by a quadratic fit on its 3x3 stencil.
pub fn track_vortex(psi: &Wavefunction, previous: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let g = psi.grid;
    let rho: Vec<f64> = psi.data.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = rho.iter().sum();
    let mean = if total > 0.0 { rho.iter().map(|r| r * r).sum::<f64>() / total } else { 0.0 };
    if !(mean > 0.0) {
        return Err(Error::LostVortex("field vanishes".into()));
    }

    let ring = |i: usize, j: usize| -> [(usize, usize); 8] {
        [
            (i + 1, j),
            (i + 1, j + 1),
            (i, j + 1),
            (i - 1, j + 1),
            (i - 1, j),
            (i - 1, j - 1),
            (i, j - 1),
            (i + 1, j - 1),
        ]
    };

    let mut best: Option<(usize, usize, f64)> = None;
    for j in 1..g.n_y - 1 {
        for i in 1..g.n_x - 1 {
            let (x, y) = (g.x(i), g.y(j));
            if let Some((px, py)) = previous {
                if (x - px).hypot(y - py) > TRACK_RADIUS {
                    continue;
                }
            }
            let r0 = rho[g.index(i, j)];
            let neighbours = ring(i, j);
            if neighbours.iter().any(|&(a, b)| rho[g.index(a, b)] < r0) {
                continue;
            }
            let mut winding = 0.0;
            for k in 0..8 {
                let (a, b) = neighbours[k];
                let (c, d) = neighbours[(k + 1) % 8];
                winding += (psi.at(c, d) * psi.at(a, b).conj()).arg();
            }
            if (winding / std::f64::consts::TAU).round() == 0.0 {
                continue;
            }
            let surround = disk_mean(&rho, &g, i, j);
            if best.is_none_or(|(_, _, m)| surround > m) {
                best = Some((i, j, surround));
            }
        }
    }
    let (i, j, surround) = best.ok_or_else(|| Error::LostVortex("no density minimum with phase winding".into()))?;
    let r0 = rho[g.index(i, j)];
    if r0 > CORE_FILL_FRACTION * mean {
        return Err(Error::LostVortex(format!("core density {r0:.3e} exceeds {CORE_FILL_FRACTION} x mean {mean:.3e}")));
    }
    if surround < CLOUD_EDGE_FRACTION * mean {
        return Err(Error::LostVortex(format!("core at ({:.3}, {:.3}) is outside the cloud", g.x(i), g.y(j))));
    }

    // Least-squares fit rho = c0 + c1 u + c2 v + c3 u^2 + c4 u v + c5 v^2 on the
    // 3x3 stencil, with (u, v) in cell units.
    let mut ata = nalgebra::Matrix6::<f64>::zeros();
    let mut atb = nalgebra::Vector6::<f64>::zeros();
    for dv in -1i32..=1 {
        for du in -1i32..=1 {
            let (u, v) = (du as f64, dv as f64);
            let row = nalgebra::Vector6::new(1.0, u, v, u * u, u * v, v * v);
            let val = rho[g.index((i as i32 + du) as usize, (j as i32 + dv) as usize)];
            ata += row * row.transpose();
            atb += row * val;
        }
    }
    let coef = ata.lu().solve(&atb).ok_or_else(|| Error::LostVortex("degenerate core stencil".into()))?;
    let hess = nalgebra::Matrix2::new(2.0 * coef[3], coef[4], coef[4], 2.0 * coef[5]);
    let grad = nalgebra::Vector2::new(coef[1], coef[2]);
    let (mut du, mut dv) = (0.0, 0.0);
    if hess.determinant() > 0.0 && hess[(0, 0)] > 0.0 {
        if let Some(s) = hess.lu().solve(&(-grad)) {
            du = s[0].clamp(-1.0, 1.0);
            dv = s[1].clamp(-1.0, 1.0);
        }
    }
    Ok((g.x(i) + du * g.dx(), g.y(j) + dv * g.dy()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecessionOptions {
    pub g: f64,
    pub dt: f64,
    pub grid: GridSpec,
    pub record_every: usize,
    pub absorbing_width: f64,
}

impl Default for PrecessionOptions {
    fn default() -> Self {
        Self { g: 1.0, dt: 1e-3, grid: GridSpec::standard(), record_every: 1, absorbing_width: 0.0 }
    }
}

/// Off-center vortex released at `(x0, y0)` and tracked every recorded step.
/// A lost core truncates the trajectory instead of failing.
pub fn precession_experiment(
    spec: &PotentialSpec,
    gamma: f64,
    x0: f64,
    y0: f64,
    t_end: f64,
    options: &PrecessionOptions,
) -> Result<Trajectory> {
    let spec = spec.with_gamma(gamma);
    let psi0 = offcenter_vortex(x0, y0, options.grid);
    let config = PropagationConfig {
        dt: options.dt,
        n_steps: (t_end / options.dt).round() as usize,
        noise_amplitude: 0.0,
        record_every: options.record_every,
        grid: options.grid,
        seed: 0,
        absorbing_width: options.absorbing_width,
        track_vortex: true,
    };
    Ok(evolve(&psi0, &config, options.g, &spec)?.trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_smooth_at_zero() {
        assert!((phi(1e-9) - 1.0).abs() < 1e-8);
        assert!((phi(0.5) - (0.5f64.exp() - 1.0) / 0.5).abs() < 1e-15);
        assert!((phi(-1e-6) - phi(1e-6)).abs() < 2e-6);
    }

    #[test]
    fn linear_ground_state_advances_phase() {
        let grid = GridSpec::extended();
        let psi = ComplexField::from_fn(grid, |x, y| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0)).normalized();
        let dt = 1e-3;
        let next = split_step(&psi, dt, 0.0, &PotentialSpec::a(0.0)).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in psi.data.iter().zip(&next.data) {
            worst = worst.max((a.norm_sqr() - b.norm_sqr()).abs());
        }
        assert!(worst < 1e-10);
        let phase = psi.inner(&next).unwrap().arg();
        assert!((phase + 2.0 * dt).abs() < 1e-9);
    }

    #[test]
    fn zero_steps_is_identity() {
        let grid = GridSpec::standard();
        let psi = offcenter_vortex(0.0, 0.0, grid);
        let cfg = PropagationConfig { n_steps: 0, ..Default::default() };
        let ev = evolve(&psi, &cfg, 1.0, &PotentialSpec::a(1.0)).unwrap();
        assert_eq!(ev.final_state, psi);
        assert_eq!(ev.trajectory.len(), 1);
    }

    #[test]
    fn tracks_offcenter_core() {
        let grid = GridSpec::standard();
        let (x, y) = track_vortex(&offcenter_vortex(0.2, 0.2, grid), None).unwrap();
        assert!((x - 0.2).abs() < 1e-3 && (y - 0.2).abs() < 1e-3, "({x}, {y})");
        let (x, y) = track_vortex(&offcenter_vortex(0.0, 0.0, grid), None).unwrap();
        assert!(x.abs() < 1e-6 && y.abs() < 1e-6);
    }

    #[test]
    fn ground_state_has_no_core() {
        let grid = GridSpec::standard();
        let psi = ComplexField::from_fn(grid, |x, y| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0));
        assert!(matches!(track_vortex(&psi, None), Err(Error::LostVortex(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = PropagationConfig { dt: -1.0, record_every: 0, ..Default::default() };
        match cfg.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noise_is_seeded() {
        let grid = GridSpec::standard();
        let mut a = offcenter_vortex(0.0, 0.0, grid);
        let mut b = a.clone();
        add_noise(&mut a, 1e-2, 7);
        add_noise(&mut b, 1e-2, 7);
        assert_eq!(a, b);
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
