//! Bogoliubov-de Gennes linear stability in the oscillator basis.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::stationary::{GpeProblem, SpectrumBranch, StationaryState, REAL_MU_TOL};

pub const DEFAULT_STABILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BdgSpectrum {
    pub omegas: Vec<Complex64>,
    pub max_imag: f64,
    pub n_unstable: usize,
    pub stable: bool,
    pub stability_tol: f64,
    pub state_ref: String,
}

impl BdgSpectrum {
    fn from_omegas(omegas: Vec<Complex64>, stability_tol: f64) -> Self {
        let max_imag = omegas.iter().map(|w| w.im).fold(0.0, f64::max);
        let n_unstable = omegas.iter().filter(|w| w.im > stability_tol).count();
        Self { omegas, max_imag, n_unstable, stable: max_imag < stability_tol, stability_tol, state_ref: String::new() }
    }

    /// Largest distance from any `omega` to the nearest of `-omega`, `omega*`, `-omega*`.
    pub fn quartet_defect(&self) -> f64 {
        quartet_defect(&self.omegas)
    }

    /// Eigenvalues with positive imaginary part above the tolerance.
    pub fn unstable_modes(&self) -> Vec<Complex64> {
        self.omegas.iter().copied().filter(|w| w.im > self.stability_tol).collect()
    }
}

/// `[[A, B], [-B*, -A*]]` with `A = H_lin + 2 g |psi|^2 - mu` and `B = g psi^2`.
/// The basis is real, so conjugating an operator conjugates its matrix entrywise.
pub fn build_bdg_matrix(state: &StationaryState, basis: &BasisSet) -> Result<DMatrix<Complex64>> {
    if state.coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), found: state.coeffs.len() });
    }
    if !state.is_converged(1e-8) {
        return Err(Error::NotConverged(format!("residual {:.3e}", state.residual_norm)));
    }
    if state.mu.im.abs() >= REAL_MU_TOL {
        return Err(Error::NotConverged(format!("complex chemical potential, Im mu = {:.3e}", state.mu.im)));
    }
    let problem = GpeProblem::new(basis, state.g, &state.potential)?;
    let (a, b) = problem.linearization(&state.coeffs, Complex64::new(state.mu.re, 0.0))?;
    let n = basis.len();
    let mut m = DMatrix::from_element(2 * n, 2 * n, Complex64::new(0.0, 0.0));
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] = a[(r, c)];
            m[(r, n + c)] = b[(r, c)];
            m[(n + r, c)] = -b[(r, c)].conj();
            m[(n + r, n + c)] = -a[(r, c)].conj();
        }
    }
    Ok(m)
}

/// All eigenvalues of a BdG matrix from its complex Schur form.
pub fn solve_bdg(matrix: DMatrix<Complex64>) -> Result<BdgSpectrum> {
    solve_bdg_with_tol(matrix, DEFAULT_STABILITY_TOL)
}

pub fn solve_bdg_with_tol(matrix: DMatrix<Complex64>, stability_tol: f64) -> Result<BdgSpectrum> {
    let n = matrix.nrows();
    if n != matrix.ncols() || !n.is_multiple_of(2) {
        return Err(Error::Eigensolver(format!("matrix is {}x{}, expected square of even size", n, matrix.ncols())));
    }
    if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(matrix, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let omegas = (0..n).map(|i| t[(i, i)]).collect();
    Ok(BdgSpectrum::from_omegas(omegas, stability_tol))
}

/// Build and solve in one call.
pub fn analyze(state: &StationaryState, basis: &BasisSet, stability_tol: f64) -> Result<BdgSpectrum> {
    let mut spectrum = solve_bdg_with_tol(build_bdg_matrix(state, basis)?, stability_tol)?;
    spectrum.state_ref = format!("{}@gamma={},d={}", state.branch_label, state.potential.gamma, state.potential.d);
    Ok(spectrum)
}

pub fn quartet_defect(omegas: &[Complex64]) -> f64 {
    let nearest = |target: Complex64| omegas.iter().map(|w| (w - target).norm()).fold(f64::INFINITY, f64::min);
    omegas
        .iter()
        .map(|w| nearest(-w).max(nearest(w.conj())).max(nearest(-w.conj())))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct StabilityPoint {
    pub param: f64,
    pub spectrum: std::result::Result<BdgSpectrum, String>,
}

impl StabilityPoint {
    pub fn max_imag(&self) -> Option<f64> {
        self.spectrum.as_ref().ok().map(|s| s.max_imag)
    }
}

/// One spectrum per branch sample, computed in parallel. Failures become gaps.
pub fn stability_sweep(branch: &SpectrumBranch, basis: &BasisSet, stability_tol: f64) -> Vec<StabilityPoint> {
    branch
        .samples
        .par_iter()
        .map(|(param, state)| StabilityPoint {
            param: *param,
            spectrum: analyze(state, basis, stability_tol).map_err(|e| e.to_string()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::grid::GridSpec;
    use crate::potential::PotentialSpec;
    use crate::stationary::{solve_branch_point, BranchLabel, SolverOptions};

    #[test]
    fn linear_ground_state_spectrum() {
        let b = build_basis(6, GridSpec::basis_default()).unwrap();
        let s = solve_branch_point(BranchLabel::Ground, 0.0, &PotentialSpec::a(0.0), &b, &SolverOptions::default()).unwrap();
        let m = build_bdg_matrix(&s, &b).unwrap();
        assert_eq!(m.nrows(), 2 * b.len());
        let spec = solve_bdg(m).unwrap();
        assert!(spec.omegas.iter().all(|w| w.im.abs() < 1e-10));
        let smallest = spec.omegas.iter().map(|w| w.re).filter(|&r| r > 1e-6).fold(f64::INFINITY, f64::min);
        assert!((smallest - 2.0).abs() < 1e-8);
        assert!(spec.stable);
        assert!(spec.quartet_defect() < 1e-8);
    }

    #[test]
    fn rejects_unconverged_state() {
        let b = build_basis(4, GridSpec::basis_default()).unwrap();
        let mut s = solve_branch_point(BranchLabel::Ground, 1.0, &PotentialSpec::a(0.0), &b, &SolverOptions::default()).unwrap();
        s.residual_norm = 1.0;
        assert!(matches!(build_bdg_matrix(&s, &b), Err(Error::NotConverged(_))));
    }

    #[test]
    fn odd_dimension_rejected() {
        let m = DMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        assert!(solve_bdg(m).is_err());
    }

    #[test]
    fn quartet_of_symmetric_set() {
        let w = Complex64::new(1.0, 0.5);
        let set = vec![w, -w, w.conj(), -w.conj()];
        assert!(quartet_defect(&set) < 1e-15);
        assert!(quartet_defect(&[w, -w]) > 0.5);
    }
}
