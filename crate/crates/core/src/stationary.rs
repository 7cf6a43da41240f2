//! Stationary states as roots of the projected Gross-Pitaevskii equation.
//!
//! Unknowns are the basis coefficients `c` and the chemical potential `mu`,
//! both complex. Newton runs on the real vector `[Re c, Im c, Re mu, Im mu]`
//! against `[Re F, Im F, |c|^2 - 1, Im c_k]`, where `k` is the largest
//! coefficient of the starting guess and is rotated to the positive real axis
//! before the first iteration.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::grid::{Spectral, Wavefunction};
use crate::observables::{azimuthal_current_of, current_with};
use crate::potential::{is_pt_symmetric, PotentialSpec};

/// `|J_phi|` above this marks a vortex.
pub const VORTEX_CURRENT_THRESHOLD: f64 = 1e-6;
/// Largest `|Im mu|` of a PT-unbroken state.
pub const REAL_MU_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchLabel {
    Ground,
    ExcitedX,
    ExcitedY,
    VortexPlus,
    VortexMinus,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 5] = [
        BranchLabel::Ground,
        BranchLabel::ExcitedX,
        BranchLabel::ExcitedY,
        BranchLabel::VortexPlus,
        BranchLabel::VortexMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BranchLabel::Ground => "ground",
            BranchLabel::ExcitedX => "excited_x",
            BranchLabel::ExcitedY => "excited_y",
            BranchLabel::VortexPlus => "vortex_plus",
            BranchLabel::VortexMinus => "vortex_minus",
        }
    }

    pub fn is_vortex(self) -> bool {
        matches!(self, BranchLabel::VortexPlus | BranchLabel::VortexMinus)
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BranchLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        BranchLabel::ALL
            .into_iter()
            .find(|l| l.name() == key)
            .ok_or_else(|| Error::Config(vec![format!("unknown branch {s:?}")]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    Gamma,
    D,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Gamma => "gamma",
            SweepParameter::D => "d",
        }
    }

    pub fn apply(self, template: &PotentialSpec, value: f64) -> PotentialSpec {
        match self {
            SweepParameter::Gamma => template.with_gamma(value),
            SweepParameter::D => template.with_d(value),
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma" => Ok(SweepParameter::Gamma),
            "d" => Ok(SweepParameter::D),
            other => Err(Error::Config(vec![format!("unknown sweep parameter {other:?}")])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, max_halvings: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub coeffs: Vec<Complex64>,
    pub mu: Complex64,
    pub g: f64,
    pub potential: PotentialSpec,
    pub residual_norm: f64,
    pub branch_label: BranchLabel,
    pub iterations: usize,
    /// Azimuthal current measured on the basis grid.
    pub j_phi: f64,
}

impl StationaryState {
    pub fn wavefunction(&self, basis: &BasisSet) -> Result<Wavefunction> {
        basis.coeffs_to_grid(&self.coeffs)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|<self|other>|` in coefficient space.
    pub fn overlap(&self, other: &StationaryState) -> f64 {
        coeff_overlap(&self.coeffs, &other.coeffs)
    }

    pub fn is_converged(&self, tol: f64) -> bool {
        self.residual_norm < tol && (self.norm_sqr() - 1.0).abs() < 1e-8
    }
}

fn coeff_overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(p, q)| p.conj() * q).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    ip.norm() / (na * nb).sqrt()
}

/// Everything the residual and Jacobian need, sampled once.
pub struct GpeProblem<'a> {
    basis: &'a BasisSet,
    g: f64,
    energies: Vec<f64>,
    extra: Vec<Complex64>,
}

impl<'a> GpeProblem<'a> {
    pub fn new(basis: &'a BasisSet, g: f64, spec: &PotentialSpec) -> Result<Self> {
        Ok(Self { basis, g, energies: basis.energies(), extra: spec.sample_extra(basis.grid())? })
    }

    /// Projected `(H - mu) psi`, without the normalization entry.
    pub fn projected(&self, c: &[Complex64], mu: Complex64) -> Result<Vec<Complex64>> {
        let psi = self.basis.coeffs_to_grid(c)?;
        let nonlinear: Vec<Complex64> =
            psi.data.iter().zip(&self.extra).map(|(p, v)| (v + self.g * p.norm_sqr()) * p).collect();
        let proj = self.basis.project(&nonlinear);
        Ok(c.iter().zip(&self.energies).zip(proj).map(|((ck, e), pk)| (e - mu) * ck + pk).collect())
    }

    /// Blocks `K = diag(E - mu) + W[V_extra + 2 g |psi|^2]` and `M = W[g psi^2]`.
    pub fn linearization(&self, c: &[Complex64], mu: Complex64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let psi = self.basis.coeffs_to_grid(c)?;
        let wk: Vec<Complex64> =
            psi.data.iter().zip(&self.extra).map(|(p, v)| v + 2.0 * self.g * p.norm_sqr()).collect();
        let wm: Vec<Complex64> = psi.data.iter().map(|p| self.g * p * p).collect();
        let mut k = self.basis.weighted_matrix(&wk);
        for (i, e) in self.energies.iter().enumerate() {
            k[(i, i)] += e - mu;
        }
        Ok((k, self.basis.weighted_matrix(&wm)))
    }

    fn real_residual(&self, c: &[Complex64], mu: Complex64, gauge: usize) -> Result<DVector<f64>> {
        let f = self.projected(c, mu)?;
        let n = c.len();
        let mut r = DVector::zeros(2 * n + 2);
        for k in 0..n {
            r[k] = f[k].re;
            r[n + k] = f[k].im;
        }
        r[2 * n] = c.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0;
        r[2 * n + 1] = c[gauge].im;
        Ok(r)
    }

    /// Jacobian of [`Self::real_residual`] with respect to `[Re c, Im c, Re mu, Im mu]`.
    pub fn jacobian(&self, c: &[Complex64], mu: Complex64, gauge: usize) -> Result<DMatrix<f64>> {
        let (k, m) = self.linearization(c, mu)?;
        let n = c.len();
        let mut jac = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        for r in 0..n {
            for s in 0..n {
                let p = k[(r, s)] + m[(r, s)];
                let q = k[(r, s)] - m[(r, s)];
                jac[(r, s)] = p.re;
                jac[(r, n + s)] = -q.im;
                jac[(n + r, s)] = p.im;
                jac[(n + r, n + s)] = q.re;
            }
            jac[(r, 2 * n)] = -c[r].re;
            jac[(r, 2 * n + 1)] = c[r].im;
            jac[(n + r, 2 * n)] = -c[r].im;
            jac[(n + r, 2 * n + 1)] = -c[r].re;
            jac[(2 * n, r)] = 2.0 * c[r].re;
            jac[(2 * n, n + r)] = 2.0 * c[r].im;
        }
        jac[(2 * n + 1, n + gauge)] = 1.0;
        Ok(jac)
    }
}

/// Projected residual of the stationary equation followed by `|psi|^2 - 1`.
pub fn gpe_residual(
    c: &[Complex64],
    mu: Complex64,
    g: f64,
    spec: &PotentialSpec,
    basis: &BasisSet,
) -> Result<Vec<Complex64>> {
    let problem = GpeProblem::new(basis, g, spec)?;
    let mut out = problem.projected(c, mu)?;
    out.push(Complex64::new(c.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0, 0.0));
    Ok(out)
}

/// Harmonic-oscillator seed for each branch.
pub fn initial_guess(label: BranchLabel, basis: &BasisSet) -> Result<(Vec<Complex64>, Complex64)> {
    if basis.n_max() < 1 && label != BranchLabel::Ground {
        return Err(Error::BranchStart(format!("{label} needs n_max >= 1")));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); basis.len()];
    let at = |nx, ny| basis.index_of(nx, ny).expect("state inside truncation");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mu = match label {
        BranchLabel::Ground => {
            c[at(0, 0)] = Complex64::new(1.0, 0.0);
            2.0
        }
        BranchLabel::ExcitedX => {
            c[at(1, 0)] = Complex64::new(1.0, 0.0);
            4.0
        }
        BranchLabel::ExcitedY => {
            c[at(0, 1)] = Complex64::new(1.0, 0.0);
            4.0
        }
        BranchLabel::VortexPlus | BranchLabel::VortexMinus => {
            let sign = if label == BranchLabel::VortexPlus { 1.0 } else { -1.0 };
            c[at(1, 0)] = Complex64::new(s, 0.0);
            c[at(0, 1)] = Complex64::new(0.0, sign * s);
            4.0
        }
    };
    Ok((c, Complex64::new(mu, 0.0)))
}

fn solve_linear(jac: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = jac.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let smallest = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if largest > 0.0 && smallest > 1e-10 * largest {
        if let Some(x) = lu.solve(rhs) {
            return Some(x);
        }
    }
    // Minimum-norm step when the Jacobian is (nearly) rank deficient, as for
    // the rotated copies of excited states in the rotationally symmetric trap.
    let svd = jac.svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    svd.solve(rhs, cutoff).ok()
}

const STALL_WINDOW: usize = 10;

fn rotate_gauge(c: &mut [Complex64]) -> usize {
    let gauge = c
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let z = c[gauge];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        c.iter_mut().for_each(|v| *v *= phase);
    }
    gauge
}

/// Newton iteration with step halving. The branch label of the result is
/// measured from its current, not taken from `seed_label`.
pub fn solve_stationary(
    guess: (&[Complex64], Complex64),
    g: f64,
    spec: &PotentialSpec,
    basis: &BasisSet,
    opts: &SolverOptions,
    seed_label: BranchLabel,
) -> Result<StationaryState> {
    let problem = GpeProblem::new(basis, g, spec)?;
    let n = basis.len();
    if guess.0.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: guess.0.len() });
    }
    let mut c = guess.0.to_vec();
    let mut mu = guess.1;
    let gauge = rotate_gauge(&mut c);
    let mut r = problem.real_residual(&c, mu, gauge)?;
    let mut rn = r.norm();
    let mut iterations = 0;
    let mut lu_failures = 0;
    let mut history = vec![rn];
    while rn >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: rn });
        }
        // stalled: less than a factor 2 gained over the last STALL_WINDOW iterations
        if history.len() > STALL_WINDOW && rn > 0.5 * history[history.len() - 1 - STALL_WINDOW] {
            return Err(Error::NoConvergence { iterations, residual: rn });
        }
        iterations += 1;
        let jac = problem.jacobian(&c, mu, gauge)?;
        let Some(step) = solve_linear(jac, &(-&r)) else {
            return Err(Error::JacobianSingular { iteration: iterations, residual: rn });
        };
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::JacobianSingular { iteration: iterations, residual: rn });
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial_c: Vec<Complex64> =
                (0..n).map(|k| c[k] + lambda * Complex64::new(step[k], step[n + k])).collect();
            let trial_mu = mu + lambda * Complex64::new(step[2 * n], step[2 * n + 1]);
            let trial_r = problem.real_residual(&trial_c, trial_mu, gauge)?;
            let trial_rn = trial_r.norm();
            let better = trial_rn < rn;
            accepted = Some((trial_c, trial_mu, trial_r, trial_rn));
            if better {
                break;
            }
            lambda *= 0.5;
        }
        let (nc, nmu, nr, nrn) = accepted.expect("at least one trial step");
        if !nrn.is_finite() {
            return Err(Error::NoConvergence { iterations, residual: rn });
        }
        if nrn >= rn {
            lu_failures += 1;
            if lu_failures > 5 {
                return Err(Error::JacobianSingular { iteration: iterations, residual: rn });
            }
        } else {
            lu_failures = 0;
        }
        c = nc;
        mu = nmu;
        r = nr;
        rn = nrn;
        history.push(rn);
    }
    let spectral = Spectral::new(*basis.grid());
    let psi = basis.coeffs_to_grid(&c)?;
    let j_phi = azimuthal_current_of(&current_with(&spectral, &psi));
    let branch_label = classify(&c, basis, j_phi, seed_label);
    Ok(StationaryState {
        coeffs: c,
        mu,
        g,
        potential: spec.clone(),
        residual_norm: rn,
        branch_label,
        iterations,
        j_phi,
    })
}

/// Label from the measured current and the `y` parity of the coefficients.
pub fn classify(c: &[Complex64], basis: &BasisSet, j_phi: f64, seed: BranchLabel) -> BranchLabel {
    if j_phi > VORTEX_CURRENT_THRESHOLD {
        return BranchLabel::VortexPlus;
    }
    if j_phi < -VORTEX_CURRENT_THRESHOLD {
        return BranchLabel::VortexMinus;
    }
    let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let odd_y: f64 = basis.states().iter().zip(c).filter(|((_, ny), _)| ny % 2 == 1).map(|(_, z)| z.norm_sqr()).sum();
    if odd_y > 0.5 * total {
        BranchLabel::ExcitedY
    } else if seed == BranchLabel::Ground {
        BranchLabel::Ground
    } else {
        BranchLabel::ExcitedX
    }
}

/// Solve one branch point from the harmonic-oscillator seed.
pub fn solve_branch_point(
    label: BranchLabel,
    g: f64,
    spec: &PotentialSpec,
    basis: &BasisSet,
    opts: &SolverOptions,
) -> Result<StationaryState> {
    let (c, mu) = initial_guess(label, basis)?;
    solve_stationary((&c, mu), g, spec, basis, opts, label)
}

/// `(E_kin, E_pot)` with `E_kin = int |grad psi|^2` and `E_pot = int V |psi|^2`.
pub fn energy_split(state: &StationaryState, basis: &BasisSet) -> Result<(f64, Complex64)> {
    let psi = state.wavefunction(basis)?;
    let spectral = Spectral::new(psi.grid);
    let (dx, dy) = spectral.gradient(&psi.data);
    let area = psi.grid.cell_area();
    let e_kin = dx.iter().zip(&dy).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum::<f64>() * area;
    let v = state.potential.sample_full(&psi.grid)?;
    let e_pot: Complex64 = v.iter().zip(&psi.data).map(|(v, p)| v * p.norm_sqr()).sum::<Complex64>() * area;
    Ok((e_kin, e_pot))
}

#[derive(Debug, Clone)]
pub struct SpectrumBranch {
    pub label: BranchLabel,
    pub parameter: SweepParameter,
    pub g: f64,
    pub template: PotentialSpec,
    pub samples: Vec<(f64, StationaryState)>,
    /// First parameter value at which continuation failed with the smallest step.
    pub terminated_at: Option<f64>,
    pub termination_reason: Option<String>,
}

impl SpectrumBranch {
    pub fn last(&self) -> Option<&(f64, StationaryState)> {
        self.samples.last()
    }

    /// Samples whose parameter is one of the requested values.
    pub fn at(&self, value: f64) -> Option<&StationaryState> {
        self.samples.iter().find(|(p, _)| (p - value).abs() < 1e-12).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub solver: SolverOptions,
    pub min_step: f64,
    pub min_overlap: f64,
    /// Record sub-step points taken while halving, not only the requested values.
    pub keep_substeps: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), min_step: 1e-4, min_overlap: 0.9, keep_substeps: false }
    }
}

/// Why a continuation step was rejected.
fn step_rejection(
    prev: &StationaryState,
    next: &StationaryState,
    label: BranchLabel,
    pt_symmetric: bool,
    min_overlap: f64,
) -> Option<String> {
    if next.branch_label != label {
        return Some(format!("label changed to {}", next.branch_label));
    }
    let ov = prev.overlap(next);
    if ov <= min_overlap {
        return Some(format!("overlap {ov:.3} with previous point"));
    }
    if pt_symmetric && next.mu.im.abs() > REAL_MU_TOL {
        return Some(format!("complex mu (Im mu = {:.3e})", next.mu.im));
    }
    None
}

/// Follow a branch through `values`, seeding every solve with the previous
/// point and halving the step on failure down to `min_step`.
pub fn continue_branch(
    label: BranchLabel,
    g: f64,
    template: &PotentialSpec,
    parameter: SweepParameter,
    values: &[f64],
    basis: &BasisSet,
    opts: &ContinuationOptions,
) -> Result<SpectrumBranch> {
    let mut branch = SpectrumBranch {
        label,
        parameter,
        g,
        template: template.clone(),
        samples: Vec::new(),
        terminated_at: None,
        termination_reason: None,
    };
    let Some(&first) = values.first() else {
        return Ok(branch);
    };
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config(vec!["sweep values must be sorted".into()]));
    }
    let start_spec = parameter.apply(template, first);
    let start = solve_branch_point(label, g, &start_spec, basis, &opts.solver)
        .map_err(|e| Error::BranchStart(format!("{label} at {}={first}: {e}", parameter.name())))?;
    if start.branch_label != label {
        return Err(Error::BranchStart(format!(
            "{label} at {}={first} converged to {}",
            parameter.name(),
            start.branch_label
        )));
    }
    let pt_symmetric = is_pt_symmetric(&start_spec, basis.grid(), 1e-12);
    branch.samples.push((first, start));

    let mut current = first;
    let mut prev = branch.samples[0].1.clone();
    for &target in &values[1..] {
        let mut step = target - current;
        while current < target && step > 0.0 {
            let p = (current + step).min(target);
            let spec = parameter.apply(template, p);
            let outcome = solve_stationary((&prev.coeffs, prev.mu), g, &spec, basis, &opts.solver, label);
            let reason = match &outcome {
                Ok(next) => step_rejection(&prev, next, label, pt_symmetric, opts.min_overlap),
                Err(e) => Some(e.to_string()),
            };
            match reason {
                None => {
                    let next = outcome.expect("accepted step");
                    current = p;
                    prev = next.clone();
                    step = (2.0 * step).min(target - current).max(0.0);
                    if p == target || opts.keep_substeps {
                        branch.samples.push((p, next));
                    }
                }
                Some(why) => {
                    step *= 0.5;
                    if step < opts.min_step {
                        if branch.samples.last().map(|s| s.0) != Some(current) {
                            branch.samples.push((current, prev.clone()));
                        }
                        branch.terminated_at = Some(p);
                        branch.termination_reason = Some(why);
                        return Ok(branch);
                    }
                }
            }
        }
    }
    Ok(branch)
}

#[derive(Debug, Clone)]
pub struct Bifurcation {
    pub parameter: f64,
    /// Last state on the branch, within `refine_tol` of `parameter`.
    pub last_state: StationaryState,
    pub last_parameter: f64,
}

/// Bisect between the last converged parameter and the termination point.
pub fn locate_bifurcation(
    branch: &SpectrumBranch,
    basis: &BasisSet,
    refine_tol: f64,
    opts: &ContinuationOptions,
) -> Result<Bifurcation> {
    let stop = branch.terminated_at.ok_or(Error::NotTerminated)?;
    let (mut lo, mut state) = branch.last().cloned().ok_or(Error::NotTerminated)?;
    let pt_symmetric = is_pt_symmetric(&branch.parameter.apply(&branch.template, lo), basis.grid(), 1e-12);
    let mut hi = stop;
    while (hi - lo).abs() > refine_tol {
        let mid = 0.5 * (lo + hi);
        let spec = branch.parameter.apply(&branch.template, mid);
        let outcome = solve_stationary((&state.coeffs, state.mu), branch.g, &spec, basis, &opts.solver, branch.label);
        match outcome {
            Ok(next) if step_rejection(&state, &next, branch.label, pt_symmetric, opts.min_overlap).is_none() => {
                lo = mid;
                state = next;
            }
            _ => hi = mid,
        }
    }
    Ok(Bifurcation { parameter: 0.5 * (lo + hi), last_state: state, last_parameter: lo })
}

/// Overlap `|<psi|PT psi>|` with `PT psi(x, y) = psi*(-x, y)`, evaluated on
/// coefficients: the image of `c_(n_x, n_y)` is `(-1)^{n_x} conj(c)`.
pub fn pt_overlap(state: &StationaryState, basis: &BasisSet) -> f64 {
    let image: Vec<Complex64> = basis
        .states()
        .iter()
        .zip(&state.coeffs)
        .map(|(&(nx, _), z)| if nx % 2 == 0 { z.conj() } else { -z.conj() })
        .collect();
    coeff_overlap(&state.coeffs, &image)
}

/// Copy coefficients between truncations; states missing from `to` are dropped.
pub fn embed_coeffs(coeffs: &[Complex64], from: &BasisSet, to: &BasisSet) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); to.len()];
    for (&(nx, ny), z) in from.states().iter().zip(coeffs) {
        if let Some(k) = to.index_of(nx, ny) {
            out[k] = *z;
        }
    }
    out
}

/// Re-solve a branch state at another parameter value, seeded by `seed`.
pub fn resolve_at(
    seed: &StationaryState,
    parameter: SweepParameter,
    template: &PotentialSpec,
    value: f64,
    basis: &BasisSet,
    opts: &SolverOptions,
) -> Result<StationaryState> {
    let spec = parameter.apply(template, value);
    solve_stationary((&seed.coeffs, seed.mu), seed.g, &spec, basis, opts, seed.branch_label)
}

/// Sample of `branch` with the largest parameter not above `value`.
fn seed_below(branch: &SpectrumBranch, value: f64) -> Option<&StationaryState> {
    branch.samples.iter().rfind(|(p, _)| *p <= value + 1e-12).map(|(_, s)| s)
}

/// Among `partners`, the branch whose chemical potential at `value` is closest
/// to `mu`. Returns the label and `|mu - mu_partner|`.
pub fn nearest_partner(
    mu: Complex64,
    value: f64,
    partners: &[&SpectrumBranch],
    basis: &BasisSet,
    opts: &SolverOptions,
) -> Option<(BranchLabel, f64)> {
    partners
        .iter()
        .filter_map(|br| {
            let seed = seed_below(br, value)?;
            let s = resolve_at(seed, br.parameter, &br.template, value, basis, opts).ok()?;
            Some((br.label, (s.mu - mu).norm()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Parameter values where `Re mu` of two branches cross, refined by bisection
/// to `tol` with both states re-solved at every midpoint.
pub fn locate_crossings(
    a: &SpectrumBranch,
    b: &SpectrumBranch,
    basis: &BasisSet,
    tol: f64,
    opts: &SolverOptions,
) -> Vec<f64> {
    let common: Vec<(f64, &StationaryState, &StationaryState)> =
        a.samples.iter().filter_map(|(p, sa)| b.at(*p).map(|sb| (*p, sa, sb))).collect();
    let mut out = Vec::new();
    for w in common.windows(2) {
        let (p0, a0, b0) = w[0];
        let (p1, a1, b1) = w[1];
        let d0 = a0.mu.re - b0.mu.re;
        let d1 = a1.mu.re - b1.mu.re;
        // degenerate endpoints (symmetric points) are touchings, not crossings
        if d0.abs() < 1e-9 || d1.abs() < 1e-9 || d0.signum() == d1.signum() {
            continue;
        }
        let (mut lo, mut hi) = (p0, p1);
        let (mut sa, mut sb) = (a0.clone(), b0.clone());
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let na = resolve_at(&sa, a.parameter, &a.template, mid, basis, opts);
            let nb = resolve_at(&sb, b.parameter, &b.template, mid, basis, opts);
            let (Ok(na), Ok(nb)) = (na, nb) else { break };
            if (na.mu.re - nb.mu.re).signum() == d0.signum() {
                lo = mid;
                sa = na;
                sb = nb;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// Evenly spaced values `start, start + step, ...` up to and including `end`.
pub fn linspace_step(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    // snap to 12 decimals so 0.1-type steps print as typed
    let snap = |v: f64| (v * 1e12).round() / 1e12;
    let mut v: Vec<f64> = (0..=n).map(|k| snap(start + k as f64 * step)).collect();
    if let Some(last) = v.last_mut() {
        if (*last - end).abs() < 1e-9 * step.abs().max(1.0) {
            *last = end;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::grid::GridSpec;

    fn basis() -> BasisSet {
        build_basis(11, GridSpec::basis_default()).unwrap()
    }

    #[test]
    fn exact_linear_eigenstate_has_zero_residual() {
        let b = basis();
        let (c, _) = initial_guess(BranchLabel::Ground, &b).unwrap();
        let spec = PotentialSpec::a(0.0);
        let r = gpe_residual(&c, Complex64::new(2.0, 0.0), 0.0, &spec, &b).unwrap();
        assert!(r.iter().all(|z| z.norm() < 1e-12));
        let r3 = gpe_residual(&c, Complex64::new(3.0, 0.0), 0.0, &spec, &b).unwrap();
        for (k, z) in r3[..b.len()].iter().enumerate() {
            assert!((z + c[k]).norm() < 1e-12);
        }
        assert!(r3[b.len()].norm() < 1e-15);
    }

    #[test]
    fn linear_spectrum() {
        let b = basis();
        let spec = PotentialSpec::a(0.0);
        let opts = SolverOptions::default();
        for (label, mu) in [(BranchLabel::Ground, 2.0), (BranchLabel::VortexPlus, 4.0), (BranchLabel::ExcitedX, 4.0)] {
            let s = solve_branch_point(label, 0.0, &spec, &b, &opts).unwrap();
            assert!((s.mu - mu).norm() < 1e-10, "{label}: {}", s.mu);
            assert_eq!(s.branch_label, label);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let b = build_basis(4, GridSpec::square(6.0, 64).unwrap()).unwrap();
        let spec = PotentialSpec::a(1.3);
        let problem = GpeProblem::new(&b, 1.0, &spec).unwrap();
        let n = b.len();
        let c: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos() * 0.5)).collect();
        let mu = Complex64::new(3.1, 0.2);
        let jac = problem.jacobian(&c, mu, 0).unwrap();
        let h = 1e-6;
        for col in 0..2 * n + 2 {
            let perturb = |sign: f64| {
                let mut cc = c.clone();
                let mut mm = mu;
                let d = sign * h;
                match col {
                    k if k < n => cc[k].re += d,
                    k if k < 2 * n => cc[k - n].im += d,
                    k if k == 2 * n => mm.re += d,
                    _ => mm.im += d,
                }
                problem.real_residual(&cc, mm, 0).unwrap()
            };
            let fd = (perturb(1.0) - perturb(-1.0)) / (2.0 * h);
            for row in 0..2 * n + 2 {
                assert!((fd[row] - jac[(row, col)]).abs() < 1e-5, "({row},{col})");
            }
        }
    }

    #[test]
    fn linspace_includes_end() {
        let v = linspace_step(0.0, 1.0, 0.25);
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn locate_requires_termination() {
        let b = basis();
        let br = continue_branch(
            BranchLabel::Ground,
            0.0,
            &PotentialSpec::a(0.0),
            SweepParameter::Gamma,
            &[0.0],
            &b,
            &ContinuationOptions::default(),
        )
        .unwrap();
        assert_eq!(br.samples.len(), 1);
        assert!((br.samples[0].1.mu - 2.0).norm() < 1e-10);
        assert!(matches!(locate_bifurcation(&br, &b, 1e-3, &ContinuationOptions::default()), Err(Error::NotTerminated)));
    }
}
