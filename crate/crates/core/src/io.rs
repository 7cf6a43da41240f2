//! Data products: coefficient, branch, stability and trajectory CSV files,
//! `GPE2` binary field dumps and the run manifest.
//!
//! `GPE2` layout (little endian): the bytes `GPE2`, `u32 n_x`, `u32 n_y`,
//! `f64 x_min, x_max, y_min, y_max`, then `n_x * n_y` pairs `f64 re, f64 im`
//! with `y` as the outer index. Real fields are stored with `im = 0`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::basis::BasisSet;
use crate::bdg::StabilityPoint;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, ScalarField};
use crate::stationary::{energy_split, SpectrumBranch};

const MAGIC: &[u8; 4] = b"GPE2";
const HEADER_LEN: usize = 4 + 4 + 4 + 4 * 8;

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

pub fn encode_gpe2(field: &ComplexField) -> Vec<u8> {
    let g = field.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n_x as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_y as u32).to_le_bytes());
    for v in [g.x_min, g.x_max, g.y_min, g.y_max] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in &field.data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_gpe2(bytes: &[u8], origin: &Path) -> Result<ComplexField> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(format_error(origin, "missing GPE2 header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (n_x, n_y) = (u32_at(4), u32_at(8));
    let grid = GridSpec::new(f64_at(12), f64_at(20), f64_at(28), f64_at(36), n_x, n_y)
        .map_err(|e| format_error(origin, e.to_string()))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(format_error(origin, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data = (0..grid.len())
        .map(|k| {
            let o = HEADER_LEN + 16 * k;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    Ok(ComplexField { grid, data })
}

pub fn write_gpe2(path: &Path, field: &ComplexField) -> Result<()> {
    write_atomic(path, &encode_gpe2(field))
}

pub fn write_gpe2_real(path: &Path, field: &ScalarField) -> Result<()> {
    write_gpe2(path, &field.to_complex())
}

pub fn read_gpe2(path: &Path) -> Result<ComplexField> {
    decode_gpe2(&fs::read(path)?, path)
}

pub fn coeffs_csv(basis: &BasisSet, coeffs: &[Complex64]) -> Result<String> {
    if coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), found: coeffs.len() });
    }
    let mut s = String::from("n_x,n_y,re,im\n");
    for (&(a, b), z) in basis.states().iter().zip(coeffs) {
        writeln!(s, "{a},{b},{:?},{:?}", z.re, z.im).expect("string write");
    }
    Ok(s)
}

pub fn write_coeffs_csv(path: &Path, basis: &BasisSet, coeffs: &[Complex64]) -> Result<()> {
    write_atomic(path, coeffs_csv(basis, coeffs)?.as_bytes())
}

/// Read a coefficient file into the ordering of `basis`. States missing from
/// the file are zero; states outside the truncation are an error.
pub fn read_coeffs_csv(path: &Path, basis: &BasisSet) -> Result<Vec<Complex64>> {
    let text = fs::read_to_string(path)?;
    let mut out = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("n_x")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || format_error(path, format!("line {}: expected n_x,n_y,re,im", n + 1));
        if cols.len() != 4 {
            return Err(bad());
        }
        let a: usize = cols[0].parse().map_err(|_| bad())?;
        let b: usize = cols[1].parse().map_err(|_| bad())?;
        let re: f64 = cols[2].parse().map_err(|_| bad())?;
        let im: f64 = cols[3].parse().map_err(|_| bad())?;
        let k = basis
            .index_of(a, b)
            .ok_or_else(|| format_error(path, format!("line {}: state ({a},{b}) outside n_max = {}", n + 1, basis.n_max())))?;
        out[k] = Complex64::new(re, im);
    }
    Ok(out)
}

pub fn branch_csv(branch: &SpectrumBranch, basis: &BasisSet) -> Result<String> {
    let mut s = String::from("param,mu_re,mu_im,Ekin,Epot_re,Epot_im,Jphi,norm_residual\n");
    for (p, state) in &branch.samples {
        let (ekin, epot) = energy_split(state, basis)?;
        writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            p, state.mu.re, state.mu.im, ekin, epot.re, epot.im, state.j_phi, state.residual_norm
        )
        .expect("string write");
    }
    Ok(s)
}

pub fn stability_csv(points: &[StabilityPoint]) -> String {
    let mut s = String::from("param,max_imag,n_unstable_modes\n");
    for pt in points {
        match &pt.spectrum {
            Ok(sp) => writeln!(s, "{:?},{:?},{}", pt.param, sp.max_imag, sp.n_unstable),
            Err(_) => writeln!(s, "{:?},nan,nan", pt.param),
        }
        .expect("string write");
    }
    s
}

pub fn spectrum_csv(omegas: &[Complex64]) -> String {
    let mut s = String::from("omega_re,omega_im\n");
    for w in omegas {
        writeln!(s, "{:?},{:?}", w.re, w.im).expect("string write");
    }
    s
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,x,y,norm,overlap\n");
    for k in 0..traj.len() {
        let (x, y) = traj.centers[k];
        writeln!(s, "{:?},{:?},{:?},{:?},{:?}", traj.times[k], x, y, traj.norms[k], traj.overlaps[k]).expect("string write");
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub build: String,
    pub seed: u64,
    pub wall_time: f64,
    pub outputs: Vec<String>,
    /// Extra `key = value` lines such as termination reasons.
    pub notes: Vec<(String, String)>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "command = {}", self.command).expect("string write");
        writeln!(s, "build = {}", self.build).expect("string write");
        writeln!(s, "seed = {}", self.seed).expect("string write");
        writeln!(s, "wall_time = {:.3}", self.wall_time).expect("string write");
        for o in &self.outputs {
            writeln!(s, "output = {o}").expect("string write");
        }
        for (k, v) in &self.notes {
            writeln!(s, "note.{k} = {v}").expect("string write");
        }
        for line in self.config.lines() {
            writeln!(s, "config.{line}").expect("string write");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.txt");
        write_atomic(&path, self.to_text().as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    #[test]
    fn gpe2_round_trip() {
        let g = GridSpec::square(2.0, 8).unwrap();
        let f = ComplexField::from_fn(g, |x, y| Complex64::new(x, y * y));
        let bytes = encode_gpe2(&f);
        assert_eq!(&bytes[..4], b"GPE2");
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 64);
        let back = decode_gpe2(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, f);
        assert!(decode_gpe2(&bytes[..100], Path::new("mem")).is_err());
    }

    #[test]
    fn coeff_csv_round_trip() {
        let dir = tempdir();
        let b = build_basis(3, GridSpec::basis_default()).unwrap();
        let c: Vec<Complex64> = (0..b.len()).map(|k| Complex64::new(k as f64 / 7.0, -(k as f64).sqrt())).collect();
        let path = dir.join("x.coeff.csv");
        write_coeffs_csv(&path, &b, &c).unwrap();
        assert_eq!(read_coeffs_csv(&path, &b).unwrap(), c);
        let small = build_basis(1, GridSpec::basis_default()).unwrap();
        assert!(read_coeffs_csv(&path, &small).is_err());
        fs::remove_dir_all(dir).ok();
    }

    fn tempdir() -> PathBuf {
        let d = std::env::temp_dir().join(format!("ptvortex-io-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }
}
