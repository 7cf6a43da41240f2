//! Run configuration and the conversion of physical inputs to oscillator units.
//!
//! The file format is flat `section.key = value` text, one entry per line;
//! `#` starts a comment. Every key has a default except `g` (or the
//! `physical.*` triple it can be derived from) and `potential.kind`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dynamics::PropagationConfig;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::potential::{PotentialKind, PotentialSpec, PotentialTable};
use crate::stationary::{BranchLabel, SweepParameter};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Dimensionless interaction strength `8 pi N a / r0`.
pub fn g_from_physical(n_atoms: u64, a: f64, r0: f64) -> Result<f64> {
    let mut problems = Vec::new();
    if n_atoms < 1 {
        problems.push("physical.atoms must be >= 1".to_string());
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        problems.push(format!("physical.r0 = {r0} must be > 0"));
    }
    if !(a >= 0.0 && a.is_finite()) {
        problems.push(format!("physical.a = {a} must be >= 0"));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    Ok(8.0 * std::f64::consts::PI * n_atoms as f64 * a / r0)
}

/// Oscillator length `sqrt(hbar / (m omega0))` in metres.
pub fn oscillator_length(mass_kg: f64, omega0: f64) -> f64 {
    (HBAR / (mass_kg * omega0)).sqrt()
}

/// Energy unit `hbar^2 / (2 m r0^2)` in joules; equals `hbar omega0 / 2`.
pub fn energy_unit(mass_kg: f64, r0: f64) -> f64 {
    HBAR * HBAR / (2.0 * mass_kg * r0 * r0)
}

/// Time unit `hbar / mu0` in seconds.
pub fn time_unit(mass_kg: f64, r0: f64) -> f64 {
    HBAR / energy_unit(mass_kg, r0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g: f64,
    pub potential: PotentialSpec,
    pub potential_table: Option<PathBuf>,
    pub n_max: usize,
    /// Quadrature grid of the oscillator basis.
    pub basis_grid: GridSpec,
    /// Grid for real-time propagation and field dumps.
    pub grid: GridSpec,
    pub propagation: PropagationConfig,
    /// `GPE2` field to propagate instead of a freshly solved branch state.
    pub initial_state: Option<PathBuf>,
    pub snapshot_every: usize,
    pub sweep: Option<Sweep>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub min_step: f64,
    pub stability_tol: f64,
    pub branch: BranchLabel,
    pub branches: Vec<BranchLabel>,
    pub x0: f64,
    pub y0: f64,
    pub t_end: f64,
}

impl RunConfig {
    /// Defaults with the given interaction and potential.
    pub fn new(g: f64, potential: PotentialSpec) -> Self {
        Self {
            g,
            potential,
            potential_table: None,
            n_max: 11,
            basis_grid: GridSpec::basis_default(),
            grid: GridSpec::standard(),
            propagation: PropagationConfig::default(),
            initial_state: None,
            snapshot_every: 0,
            sweep: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            solver_tol: 1e-10,
            solver_max_iter: 100,
            min_step: 1e-4,
            stability_tol: 1e-6,
            branch: BranchLabel::Ground,
            branches: BranchLabel::ALL.to_vec(),
            x0: 0.2,
            y0: 0.2,
            t_end: 4.0,
        }
    }

    /// Parse configuration text; `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let map = parse_entries(text, origin)?;
        Self::from_entries(&map)
    }

    pub fn from_entries(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader { map, problems: Vec::new() };
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                r.problems.push(format!("{key}: unknown key"));
            }
        }

        let kind = match map.get("potential.kind") {
            None => {
                r.problems.push("potential.kind: missing required key".into());
                PotentialKind::A
            }
            Some(v) => v.parse::<PotentialKind>().unwrap_or_else(|_| {
                r.problems.push(format!("potential.kind: unknown potential kind {v:?} (expected A, B, C, PT_BROKEN_C or CUSTOM)"));
                PotentialKind::A
            }),
        };

        let physical = ["physical.atoms", "physical.a", "physical.r0"];
        let g = if map.contains_key("g") {
            r.f64("g", 0.0)
        } else if physical.iter().all(|k| map.contains_key(*k)) {
            let atoms = r.usize("physical.atoms", 1) as u64;
            let a = r.f64("physical.a", 0.0);
            let r0 = r.f64("physical.r0", 1.0);
            match g_from_physical(atoms, a, r0) {
                Ok(g) => g,
                Err(Error::Config(p)) => {
                    r.problems.extend(p);
                    0.0
                }
                Err(e) => {
                    r.problems.push(e.to_string());
                    0.0
                }
            }
        } else {
            r.problems.push("g: missing required key (or give physical.atoms, physical.a and physical.r0)".into());
            0.0
        };

        let mut cfg = RunConfig::new(g, PotentialSpec::new(kind, 0.0));
        cfg.potential.gamma = r.f64("potential.gamma", 0.0);
        cfg.potential.d = r.f64("potential.d", 1.0);
        cfg.potential.gain_factor = r.f64("potential.gain_factor", kind.default_gain_factor());
        cfg.potential_table = map.get("potential.table").map(PathBuf::from);

        cfg.n_max = r.usize("basis.n_max", 11);
        let basis_half = r.f64("basis.half_width", 8.0);
        let basis_points = r.usize("basis.points", 128);
        cfg.basis_grid = r.grid_or("basis", GridSpec::square(basis_half, basis_points));

        let preset = map.get("grid.preset").map(String::as_str).unwrap_or("standard");
        let base = match preset {
            "standard" => GridSpec::standard(),
            "extended" => GridSpec::extended(),
            other => {
                r.problems.push(format!("grid.preset: unknown preset {other:?} (expected standard or extended)"));
                GridSpec::standard()
            }
        };
        let grid = GridSpec {
            x_min: r.f64("grid.x_min", base.x_min),
            x_max: r.f64("grid.x_max", base.x_max),
            y_min: r.f64("grid.y_min", base.y_min),
            y_max: r.f64("grid.y_max", base.y_max),
            n_x: r.usize("grid.n_x", base.n_x),
            n_y: r.usize("grid.n_y", base.n_y),
        };
        cfg.grid = r.grid_or("grid", Ok(grid));

        cfg.seed = r.usize("seed", 0) as u64;
        cfg.output_dir = PathBuf::from(map.get("output_dir").cloned().unwrap_or_else(|| "out".into()));
        cfg.propagation = PropagationConfig {
            dt: r.f64("propagation.dt", 1e-3),
            n_steps: r.usize("propagation.n_steps", 1000),
            noise_amplitude: r.f64("propagation.noise_amplitude", 0.0),
            record_every: r.usize("propagation.record_every", 1),
            grid: cfg.grid,
            seed: cfg.seed,
            absorbing_width: r.f64("propagation.absorbing_width", 0.0),
            track_vortex: r.bool("propagation.track_vortex", false),
        };
        cfg.snapshot_every = r.usize("propagation.snapshot_every", 0);
        cfg.initial_state = map.get("propagation.initial_state").map(PathBuf::from);

        cfg.solver_tol = r.f64("solver.tol", 1e-10);
        cfg.solver_max_iter = r.usize("solver.max_iter", 100);
        cfg.min_step = r.f64("solver.min_step", 1e-4);
        cfg.stability_tol = r.f64("stability.tol", 1e-6);
        cfg.branch = r.label("solve.branch", BranchLabel::Ground);
        if let Some(list) = map.get("spectrum.branches") {
            cfg.branches = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .filter_map(|s| match s.parse::<BranchLabel>() {
                    Ok(l) => Some(l),
                    Err(_) => {
                        r.problems.push(format!("spectrum.branches: unknown branch {:?}", s.trim()));
                        None
                    }
                })
                .collect();
        }
        cfg.x0 = r.f64("precession.x0", 0.2);
        cfg.y0 = r.f64("precession.y0", 0.2);
        cfg.t_end = r.f64("precession.t_end", 4.0);

        cfg.sweep = r.sweep();

        if kind == PotentialKind::Custom {
            match &cfg.potential_table {
                None => r.problems.push("potential.table: required for kind CUSTOM".into()),
                Some(path) => match crate::io::read_gpe2(path) {
                    Ok(field) => {
                        let table = PotentialTable { grid: field.grid, values: field.data };
                        match PotentialSpec::custom(table) {
                            Ok(spec) => cfg.potential = spec,
                            Err(e) => r.problems.push(format!("potential.table: {e}")),
                        }
                    }
                    Err(e) => r.problems.push(format!("potential.table: {e}")),
                },
            }
        }

        let mut problems = r.problems;
        if let Err(Error::Config(more)) = cfg.validate() {
            problems.extend(more);
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            problems.sort();
            problems.dedup();
            Err(Error::Config(problems))
        }
    }

    /// Check ranges; every violation is reported.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if !(self.g >= 0.0 && self.g.is_finite()) {
            p.push(format!("g: {} must be a finite value >= 0", self.g));
        }
        if let Err(e) = self.potential.validate() {
            p.push(format!("potential: {e}"));
        }
        if !(self.potential.gamma >= 0.0) {
            p.push(format!("potential.gamma: {} must be >= 0", self.potential.gamma));
        }
        if self.n_max > crate::basis::MAX_HERMITE_ORDER {
            p.push(format!("basis.n_max: {} exceeds {}", self.n_max, crate::basis::MAX_HERMITE_ORDER));
        } else if let Err(e) = crate::basis::BasisSet::new(self.n_max, self.basis_grid) {
            p.push(format!("basis: {e}"));
        }
        if let Err(Error::Config(more)) = self.propagation.validate() {
            p.extend(more);
        }
        if !(self.solver_tol > 0.0) {
            p.push(format!("solver.tol: {} must be > 0", self.solver_tol));
        }
        if self.solver_max_iter == 0 {
            p.push("solver.max_iter: must be >= 1".into());
        }
        if !(self.min_step > 0.0) {
            p.push(format!("solver.min_step: {} must be > 0", self.min_step));
        }
        if !(self.stability_tol > 0.0) {
            p.push(format!("stability.tol: {} must be > 0", self.stability_tol));
        }
        if !(self.t_end >= 0.0) {
            p.push(format!("precession.t_end: {} must be >= 0", self.t_end));
        }
        let inside = |v: f64, lo: f64, hi: f64| v > lo && v < hi;
        if !inside(self.x0, self.grid.x_min, self.grid.x_max) || !inside(self.y0, self.grid.y_min, self.grid.y_max) {
            p.push(format!("precession.x0/y0: ({}, {}) must lie inside the grid", self.x0, self.y0));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                p.push("sweep: no values".into());
            }
            if s.values.windows(2).any(|w| w[1] <= w[0]) {
                p.push("sweep: values must be strictly increasing".into());
            }
            if s.parameter == SweepParameter::D && s.values.iter().any(|&d| d < 0.0) {
                p.push("sweep: d values must be >= 0".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Full key-value text; [`RunConfig::parse`] of the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("g", fmt_f(self.g));
        put("seed", self.seed.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("potential.kind", self.potential.kind.name().into());
        put("potential.gamma", fmt_f(self.potential.gamma));
        put("potential.d", fmt_f(self.potential.d));
        put("potential.gain_factor", fmt_f(self.potential.gain_factor));
        if let Some(t) = &self.potential_table {
            put("potential.table", t.display().to_string());
        }
        put("basis.n_max", self.n_max.to_string());
        for (prefix, g) in [("basis", &self.basis_grid), ("grid", &self.grid)] {
            put(&format!("{prefix}.x_min"), fmt_f(g.x_min));
            put(&format!("{prefix}.x_max"), fmt_f(g.x_max));
            put(&format!("{prefix}.y_min"), fmt_f(g.y_min));
            put(&format!("{prefix}.y_max"), fmt_f(g.y_max));
            put(&format!("{prefix}.n_x"), g.n_x.to_string());
            put(&format!("{prefix}.n_y"), g.n_y.to_string());
        }
        put("propagation.dt", fmt_f(self.propagation.dt));
        put("propagation.n_steps", self.propagation.n_steps.to_string());
        put("propagation.noise_amplitude", fmt_f(self.propagation.noise_amplitude));
        put("propagation.record_every", self.propagation.record_every.to_string());
        put("propagation.absorbing_width", fmt_f(self.propagation.absorbing_width));
        put("propagation.track_vortex", self.propagation.track_vortex.to_string());
        put("propagation.snapshot_every", self.snapshot_every.to_string());
        if let Some(p) = &self.initial_state {
            put("propagation.initial_state", p.display().to_string());
        }
        put("solver.tol", fmt_f(self.solver_tol));
        put("solver.max_iter", self.solver_max_iter.to_string());
        put("solver.min_step", fmt_f(self.min_step));
        put("stability.tol", fmt_f(self.stability_tol));
        put("solve.branch", self.branch.name().into());
        put("spectrum.branches", self.branches.iter().map(|b| b.name()).collect::<Vec<_>>().join(","));
        put("precession.x0", fmt_f(self.x0));
        put("precession.y0", fmt_f(self.y0));
        put("precession.t_end", fmt_f(self.t_end));
        if let Some(s) = &self.sweep {
            put("sweep.parameter", s.parameter.name().into());
            put("sweep.values", s.values.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(","));
        }
        out
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

const KNOWN_KEYS: &[&str] = &[
    "g",
    "seed",
    "output_dir",
    "physical.atoms",
    "physical.a",
    "physical.r0",
    "potential.kind",
    "potential.gamma",
    "potential.d",
    "potential.gain_factor",
    "potential.table",
    "basis.n_max",
    "basis.half_width",
    "basis.points",
    "basis.x_min",
    "basis.x_max",
    "basis.y_min",
    "basis.y_max",
    "basis.n_x",
    "basis.n_y",
    "grid.preset",
    "grid.x_min",
    "grid.x_max",
    "grid.y_min",
    "grid.y_max",
    "grid.n_x",
    "grid.n_y",
    "propagation.dt",
    "propagation.n_steps",
    "propagation.noise_amplitude",
    "propagation.record_every",
    "propagation.absorbing_width",
    "propagation.track_vortex",
    "propagation.snapshot_every",
    "propagation.initial_state",
    "solver.tol",
    "solver.max_iter",
    "solver.min_step",
    "stability.tol",
    "solve.branch",
    "spectrum.branches",
    "precession.x0",
    "precession.y0",
    "precession.t_end",
    "sweep.parameter",
    "sweep.values",
    "sweep.start",
    "sweep.stop",
    "sweep.step",
];

/// Split text into `key -> value`; later entries override earlier ones.
pub fn parse_entries(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut problems = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => problems.push(format!("{origin}:{}: expected `key = value`, found {line:?}", n + 1)),
        }
    }
    if problems.is_empty() {
        Ok(map)
    } else {
        Err(Error::Config(problems))
    }
}

/// Apply `section.key=value` overrides on top of file entries.
pub fn apply_overrides(map: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    let mut problems = Vec::new();
    for o in overrides {
        match o.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => problems.push(format!("--set {o:?}: expected section.key=value")),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems))
    }
}

/// Read, override and validate a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("{}: cannot read: {e}", path.display())]))?;
    let mut map = parse_entries(&text, &path.display().to_string())?;
    apply_overrides(&mut map, overrides)?;
    RunConfig::from_entries(&map)
}

pub fn validate(config: &RunConfig) -> Result<()> {
    config.validate()
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    problems: Vec<String>,
}

impl Reader<'_> {
    fn f64(&mut self, key: &str, default: f64) -> f64 {
        match self.map.get(key) {
            None => default,
            Some(v) => v.parse::<f64>().unwrap_or_else(|_| {
                self.problems.push(format!("{key}: {v:?} is not a number"));
                default
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        match self.map.get(key) {
            None => default,
            Some(v) => v.parse::<usize>().unwrap_or_else(|_| {
                self.problems.push(format!("{key}: {v:?} is not a non-negative integer"));
                default
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.map.get(key).map(|v| v.to_ascii_lowercase()) {
            None => default,
            Some(v) if v == "true" || v == "1" || v == "yes" => true,
            Some(v) if v == "false" || v == "0" || v == "no" => false,
            Some(v) => {
                self.problems.push(format!("{key}: {v:?} is not a boolean"));
                default
            }
        }
    }

    fn label(&mut self, key: &str, default: BranchLabel) -> BranchLabel {
        match self.map.get(key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.problems.push(format!("{key}: unknown branch {v:?}"));
                default
            }),
        }
    }

    /// Explicit `prefix.x_min ...` keys win over the fallback grid.
    fn grid_or(&mut self, prefix: &str, fallback: Result<GridSpec>) -> GridSpec {
        let base = match fallback {
            Ok(g) => g,
            Err(e) => {
                self.problems.push(format!("{prefix}: {e}"));
                GridSpec::standard()
            }
        };
        let g = GridSpec {
            x_min: self.f64(&format!("{prefix}.x_min"), base.x_min),
            x_max: self.f64(&format!("{prefix}.x_max"), base.x_max),
            y_min: self.f64(&format!("{prefix}.y_min"), base.y_min),
            y_max: self.f64(&format!("{prefix}.y_max"), base.y_max),
            n_x: self.usize(&format!("{prefix}.n_x"), base.n_x),
            n_y: self.usize(&format!("{prefix}.n_y"), base.n_y),
        };
        if let Err(e) = g.validate() {
            self.problems.push(format!("{prefix}: {e}"));
        }
        g
    }

    fn sweep(&mut self) -> Option<Sweep> {
        let param = self.map.get("sweep.parameter")?;
        let parameter = match param.parse::<SweepParameter>() {
            Ok(p) => p,
            Err(_) => {
                self.problems.push(format!("sweep.parameter: unknown parameter {param:?} (expected gamma or d)"));
                return None;
            }
        };
        let values = if let Some(list) = self.map.get("sweep.values") {
            let mut out = Vec::new();
            for item in list.split(',').filter(|s| !s.trim().is_empty()) {
                match item.trim().parse::<f64>() {
                    Ok(v) => out.push(v),
                    Err(_) => self.problems.push(format!("sweep.values: {item:?} is not a number")),
                }
            }
            out
        } else {
            let start = self.f64("sweep.start", 0.0);
            let stop = self.f64("sweep.stop", 0.0);
            let step = self.f64("sweep.step", 0.05);
            if !(step > 0.0) || stop < start {
                self.problems.push("sweep: need sweep.step > 0 and sweep.stop >= sweep.start".into());
                return None;
            }
            crate::stationary::linspace_step(start, stop, step)
        };
        Some(Sweep { parameter, values })
    }
}
