//! Harmonic trap plus imaginary gain-loss profiles.
//!
//! The full complex potential is `V = x^2 + y^2 + i * gamma * V_I(x, y)`.
//! Positive `V_I` is gain. The `Custom` kind replaces the whole of `V` by
//! a table sampled on a fixed grid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    /// `x e^{-r^2}`
    A,
    /// `x^3 e^{-r^2}`
    B,
    /// Two Gaussians at `(+-d, 0)`, gain on the right.
    C,
    /// Kind C with the gain peak scaled by `gain_factor` (1.2 by default).
    PtBrokenC,
    Custom,
}

impl PotentialKind {
    pub fn name(self) -> &'static str {
        match self {
            PotentialKind::A => "A",
            PotentialKind::B => "B",
            PotentialKind::C => "C",
            PotentialKind::PtBrokenC => "PT_BROKEN_C",
            PotentialKind::Custom => "CUSTOM",
        }
    }

    pub fn default_gain_factor(self) -> f64 {
        match self {
            PotentialKind::PtBrokenC => 1.2,
            _ => 1.0,
        }
    }

    pub fn uses_offset(self) -> bool {
        matches!(self, PotentialKind::C | PotentialKind::PtBrokenC)
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(PotentialKind::A),
            "B" => Ok(PotentialKind::B),
            "C" => Ok(PotentialKind::C),
            "PT_BROKEN_C" => Ok(PotentialKind::PtBrokenC),
            "CUSTOM" => Ok(PotentialKind::Custom),
            other => Err(Error::InvalidPotential(format!("unknown kind {other:?}"))),
        }
    }
}

/// Complex potential tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub d: f64,
    pub gamma: f64,
    pub gain_factor: f64,
    pub table: Option<Arc<PotentialTable>>,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, gamma: f64) -> Self {
        Self { kind, d: 0.0, gamma, gain_factor: kind.default_gain_factor(), table: None }
    }

    pub fn a(gamma: f64) -> Self {
        Self::new(PotentialKind::A, gamma)
    }

    pub fn b(gamma: f64) -> Self {
        Self::new(PotentialKind::B, gamma)
    }

    pub fn c(d: f64, gamma: f64) -> Self {
        Self { d, ..Self::new(PotentialKind::C, gamma) }
    }

    pub fn pt_broken_c(d: f64, gamma: f64) -> Self {
        Self { d, ..Self::new(PotentialKind::PtBrokenC, gamma) }
    }

    pub fn custom(table: PotentialTable) -> Result<Self> {
        if table.values.len() != table.grid.len() {
            return Err(Error::LengthMismatch { expected: table.grid.len(), found: table.values.len() });
        }
        Ok(Self { table: Some(Arc::new(table)), ..Self::new(PotentialKind::Custom, 0.0) })
    }

    /// Tabulate an arbitrary complex potential `V(x, y)` on `grid`.
    pub fn custom_from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = grid.points().map(|(_, _, x, y)| f(x, y)).collect();
        Self::custom(PotentialTable { grid, values }).expect("length matches by construction")
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::InvalidPotential(format!("gamma = {} is not finite", self.gamma)));
        }
        if !self.gain_factor.is_finite() || self.gain_factor < 0.0 {
            return Err(Error::InvalidPotential(format!("gain_factor = {} must be >= 0", self.gain_factor)));
        }
        if self.kind.uses_offset() && !(self.d.is_finite() && self.d >= 0.0) {
            return Err(Error::InvalidPotential(format!("d = {} must be >= 0 for kind {}", self.d, self.kind)));
        }
        if self.kind == PotentialKind::Custom && self.table.is_none() {
            return Err(Error::InvalidPotential("CUSTOM kind needs a tabulated potential".into()));
        }
        Ok(())
    }

    /// Sampled `V_T + i gamma V_I` on `grid`.
    pub fn sample_full(&self, grid: &GridSpec) -> Result<Vec<Complex64>> {
        if let Some(table) = self.custom_table(grid)? {
            return Ok(table.values.clone());
        }
        self.validate()?;
        Ok(grid
            .points()
            .map(|(_, _, x, y)| Complex64::new(evaluate_trap(x, y), self.gamma * self.shape(x, y)))
            .collect())
    }

    /// `V - V_T`, the part of the potential not diagonal in the oscillator basis.
    pub fn sample_extra(&self, grid: &GridSpec) -> Result<Vec<Complex64>> {
        if let Some(table) = self.custom_table(grid)? {
            return Ok(grid
                .points()
                .zip(&table.values)
                .map(|((_, _, x, y), v)| v - evaluate_trap(x, y))
                .collect());
        }
        self.validate()?;
        Ok(grid.points().map(|(_, _, x, y)| Complex64::new(0.0, self.gamma * self.shape(x, y))).collect())
    }

    /// Sampled `Im V` on `grid` (already multiplied by gamma).
    pub fn sample_imag(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        Ok(self.sample_full(grid)?.into_iter().map(|v| v.im).collect())
    }

    fn custom_table(&self, grid: &GridSpec) -> Result<Option<&PotentialTable>> {
        if self.kind != PotentialKind::Custom {
            return Ok(None);
        }
        let table = self
            .table
            .as_deref()
            .ok_or_else(|| Error::InvalidPotential("CUSTOM kind needs a tabulated potential".into()))?;
        if !table.grid.same_as(grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Some(table))
    }

    fn shape(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        match self.kind {
            PotentialKind::A => x * (-r2).exp(),
            PotentialKind::B => x * x * x * (-r2).exp(),
            PotentialKind::C | PotentialKind::PtBrokenC => {
                let right = (-(x - self.d).powi(2) - y * y).exp();
                let left = (-(x + self.d).powi(2) - y * y).exp();
                self.gain_factor * right - left
            }
            PotentialKind::Custom => f64::NAN,
        }
    }
}

/// `V_T = x^2 + y^2`.
pub fn evaluate_trap(x: f64, y: f64) -> f64 {
    x * x + y * y
}

/// Gain-loss profile `V_I(x, y)` without the factor gamma. Tabulated
/// potentials have no pointwise profile and are rejected.
pub fn evaluate_imaginary(spec: &PotentialSpec, x: f64, y: f64) -> Result<f64> {
    if spec.kind == PotentialKind::Custom {
        return Err(Error::InvalidPotential("CUSTOM potentials are tabulated; sample them on their grid".into()));
    }
    spec.validate()?;
    Ok(spec.shape(x, y))
}

/// `max |V(-x, y) - conj V(x, y)| < tol` over the grid. Tabulated potentials
/// are checked on their own grid.
pub fn is_pt_symmetric(spec: &PotentialSpec, grid: &GridSpec, tol: f64) -> bool {
    let (grid, values) = match (&spec.kind, &spec.table) {
        (PotentialKind::Custom, Some(t)) => (t.grid, t.values.clone()),
        _ => match spec.sample_full(grid) {
            Ok(v) => (*grid, v),
            Err(_) => return false,
        },
    };
    pt_defect(&grid, &values) < tol
}

/// `max |V(-x, y) - conj V(x, y)|` for samples on `grid`. The column `i = 0`
/// has no mirror partner inside the grid and is skipped.
pub fn pt_defect(grid: &GridSpec, values: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..grid.n_y {
        for i in 1..grid.n_x {
            let v = values[grid.index(i, j)];
            let m = values[grid.index(grid.mirror_x(i), j)];
            worst = worst.max((m - v.conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trap_values() {
        assert_eq!(evaluate_trap(0.0, 0.0), 0.0);
        assert_eq!(evaluate_trap(1.0, 1.0), 2.0);
        assert_eq!(evaluate_trap(-0.3, 2.0), evaluate_trap(0.3, 2.0));
    }

    #[test]
    fn profile_values() {
        let a = PotentialSpec::a(1.0);
        assert_eq!(evaluate_imaginary(&a, 0.0, 0.7).unwrap(), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((evaluate_imaginary(&a, s, 0.0).unwrap() - s * (-0.5f64).exp()).abs() < 1e-15);
        let c = PotentialSpec::c(3.0, 1.0);
        assert!((evaluate_imaginary(&c, 3.0, 0.0).unwrap() - (1.0 - (-36.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn kind_c_vanishes_at_zero_offset() {
        let c = PotentialSpec::c(0.0, 2.0);
        let g = GridSpec::standard();
        let worst = c.sample_imag(&g).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-14);
    }

    #[test]
    fn pt_symmetry_checks() {
        let g = GridSpec::standard();
        assert!(is_pt_symmetric(&PotentialSpec::a(3.0), &g, 1e-12));
        assert!(is_pt_symmetric(&PotentialSpec::c(1.0, 2.0), &g, 1e-12));
        assert!(!is_pt_symmetric(&PotentialSpec::pt_broken_c(1.0, 0.5), &g, 1e-6));
        assert!(is_pt_symmetric(&PotentialSpec::pt_broken_c(1.0, 0.0), &g, 1e-14));
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("pt_broken_c".parse::<PotentialKind>().unwrap(), PotentialKind::PtBrokenC);
        assert!("Z".parse::<PotentialKind>().is_err());
    }

    #[test]
    fn custom_requires_matching_grid() {
        let g = GridSpec::standard();
        let spec = PotentialSpec::custom_from_fn(g, |_, _| Complex64::new(0.0, 0.0));
        assert!(spec.sample_full(&g).is_ok());
        assert!(matches!(spec.sample_full(&GridSpec::extended()), Err(Error::GridMismatch)));
        assert!(evaluate_imaginary(&spec, 0.0, 0.0).is_err());
        let extra = spec.sample_extra(&g).unwrap();
        let (i, j) = (3, 5);
        assert!((extra[g.index(i, j)].re + evaluate_trap(g.x(i), g.y(j))).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_offset() {
        assert!(PotentialSpec::c(-1.0, 1.0).validate().is_err());
    }
}
