//! `ptvortex`: stationary states, spectra, stability sweeps and real-time
//! propagation for the two-dimensional PT-symmetric Gross-Pitaevskii model.
//!
//! Exit codes: 0 success, 1 configuration error, 2 no convergence,
//! 3 I/O error, 4 numerical blow-up during propagation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pt_vortex::basis::BasisSet;
use pt_vortex::bdg::stability_sweep;
use pt_vortex::config::{apply_overrides, parse_entries, RunConfig};
use pt_vortex::dynamics::{evolve_with, precession_experiment, PrecessionOptions};
use pt_vortex::io::{
    branch_csv, read_gpe2, spectrum_csv, stability_csv, trajectory_csv, write_atomic, write_coeffs_csv, write_gpe2, RunManifest,
};
use pt_vortex::observables::{current_density, winding_number};
use pt_vortex::stationary::{
    continue_branch, energy_split, locate_bifurcation, locate_crossings, nearest_partner, solve_branch_point,
    ContinuationOptions, SolverOptions, SpectrumBranch, StationaryState,
};
use pt_vortex::{BranchLabel, ComplexField, Error, SweepParameter};

#[derive(Parser, Debug)]
#[command(name = "ptvortex", version, about = "PT-symmetric vortex states in a 2D harmonic trap")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration entry, e.g. `--set potential.gamma=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one stationary state and dump it.
    Solve {
        /// Branch to solve; overrides `solve.branch`.
        #[arg(long)]
        branch: Option<BranchLabel>,
    },
    /// Follow branches through the sweep and report bifurcations and crossings.
    Spectrum,
    /// BdG stability along each branch of the sweep.
    Stability {
        /// Also write the full spectrum of every sweep point.
        #[arg(long)]
        dump_spectra: bool,
    },
    /// Propagate a stationary state in real time.
    Evolve,
    /// Release an off-center vortex for every gamma of the sweep and track it.
    Precession,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    LabelMismatch { requested: BranchLabel, found: BranchLabel },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::LabelMismatch { .. } => 2,
            Failure::Lib(e) => match e {
                Error::Config(_)
                | Error::InvalidPotential(_)
                | Error::InvalidGrid(_)
                | Error::HermiteOrder(_)
                | Error::Nyquist { .. }
                | Error::GridMismatch
                | Error::LengthMismatch { .. } => 1,
                Error::NoConvergence { .. }
                | Error::JacobianSingular { .. }
                | Error::BranchStart(_)
                | Error::NotConverged(_)
                | Error::NotTerminated
                | Error::Eigensolver(_)
                | Error::AmplitudeTooSmall(_)
                | Error::LostVortex(_) => 2,
                Error::Io(_) | Error::Format { .. } => 3,
                Error::BlowUp { .. } => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::LabelMismatch { requested, found } => {
                format!("requested branch {requested} but the solver converged to {found}")
            }
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Run {
    config: RunConfig,
    basis: BasisSet,
    out: PathBuf,
    manifest: RunManifest,
    summary: Vec<(String, String)>,
}

impl Run {
    fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.config.solver_tol, max_iter: self.config.solver_max_iter, ..SolverOptions::default() }
    }

    fn continuation(&self) -> ContinuationOptions {
        ContinuationOptions { solver: self.solver(), min_step: self.config.min_step, ..ContinuationOptions::default() }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Outcome<()> {
        write_atomic(&self.out.join(name), bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_field(&mut self, name: &str, field: &ComplexField) -> Outcome<()> {
        write_gpe2(&self.out.join(name), field)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_coeffs(&mut self, name: &str, coeffs: &[num_complex::Complex64]) -> Outcome<()> {
        write_coeffs_csv(&self.out.join(name), &self.basis, coeffs)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.manifest.notes.push((key.into(), value.into()));
    }

    fn summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn sweep(&self) -> Outcome<(SweepParameter, Vec<f64>)> {
        let s = self
            .config
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config(vec!["sweep: this command needs sweep.parameter and sweep values".into()]))?;
        Ok((s.parameter, s.values.clone()))
    }
}

fn param_tag(v: f64) -> String {
    format!("{v:.6}")
}

fn load(global: &Global) -> Outcome<RunConfig> {
    let mut map = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(vec![format!("{}: cannot read: {e}", path.display())]))?;
            parse_entries(&text, &path.display().to_string())?
        }
        None => BTreeMap::new(),
    };
    apply_overrides(&mut map, &global.set)?;
    if let Some(seed) = global.seed {
        map.insert("seed".into(), seed.to_string());
    }
    if let Some(out) = &global.out {
        map.insert("output_dir".into(), out.display().to_string());
    }
    Ok(RunConfig::from_entries(&map)?)
}

fn observables_line(state: &StationaryState, basis: &BasisSet) -> Outcome<String> {
    let (ekin, epot) = energy_split(state, basis)?;
    let psi = state.wavefunction(basis)?;
    let winding = match winding_number(&psi, (0.0, 0.0), 1.0) {
        Ok(w) => w.to_string(),
        Err(_) => "nan".into(),
    };
    let mut s = String::from("branch,g,gamma,d,mu_re,mu_im,Ekin,Epot_re,Epot_im,Jphi,norm_residual,iterations,winding\n");
    writeln!(
        s,
        "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
        state.branch_label,
        state.g,
        state.potential.gamma,
        state.potential.d,
        state.mu.re,
        state.mu.im,
        ekin,
        epot.re,
        epot.im,
        state.j_phi,
        state.residual_norm,
        state.iterations,
        winding
    )
    .expect("string write");
    Ok(s)
}

fn solve_requested(run: &Run, label: BranchLabel) -> Outcome<StationaryState> {
    let state = solve_branch_point(label, run.config.g, &run.config.potential, &run.basis, &run.solver())?;
    if state.branch_label != label {
        return Err(Failure::LabelMismatch { requested: label, found: state.branch_label });
    }
    Ok(state)
}

fn cmd_solve(run: &mut Run, branch: Option<BranchLabel>) -> Outcome<()> {
    let label = branch.unwrap_or(run.config.branch);
    let state = solve_requested(run, label)?;
    let name = label.name();
    run.write_coeffs(&format!("{name}.coeff.csv"), &state.coeffs)?;
    let grid = run.config.grid;
    let psi = run.basis.sample_on(&state.coeffs, grid)?;
    run.write_field(&format!("{name}.gpe2"), &psi)?;
    let current = current_density(&psi);
    let packed = ComplexField {
        grid,
        data: current.jx.data.iter().zip(&current.jy.data).map(|(x, y)| num_complex::Complex64::new(*x, *y)).collect(),
    };
    run.write_field(&format!("{name}_current.gpe2"), &packed)?;
    let v = ComplexField { grid, data: state.potential.sample_full(&grid)? };
    run.write_field("potential.gpe2", &v)?;
    let line = observables_line(&state, &run.basis)?;
    run.write(&format!("{name}_observables.csv"), line.as_bytes())?;
    run.summary("branch", name);
    run.summary("mu_re", format!("{:?}", state.mu.re));
    run.summary("mu_im", format!("{:?}", state.mu.im));
    run.summary("jphi", format!("{:?}", state.j_phi));
    run.summary("residual", format!("{:.3e}", state.residual_norm));
    run.summary("iterations", state.iterations);
    Ok(())
}

/// Continue every requested branch; failures to start are recorded, not fatal.
fn run_branches(run: &mut Run, labels: &[BranchLabel]) -> Outcome<Vec<SpectrumBranch>> {
    let (parameter, values) = run.sweep()?;
    let (g, template, opts) = (run.config.g, run.config.potential.clone(), run.continuation());
    let basis = &run.basis;
    let results: Vec<_> = labels
        .par_iter()
        .map(|&label| (label, continue_branch(label, g, &template, parameter, &values, basis, &opts)))
        .collect();
    let mut branches = Vec::new();
    for (label, result) in results {
        match result {
            Ok(b) => {
                if let (Some(at), Some(why)) = (b.terminated_at, &b.termination_reason) {
                    run.note(format!("{label}.terminated_at"), format!("{at:?}"));
                    run.note(format!("{label}.termination_reason"), why.clone());
                }
                branches.push(b);
            }
            Err(e) => run.note(format!("{label}.failed"), e.to_string()),
        }
    }
    Ok(branches)
}

fn cmd_spectrum(run: &mut Run) -> Outcome<()> {
    let labels = run.config.branches.clone();
    let branches = run_branches(run, &labels)?;
    for b in &branches {
        let name = b.label.name();
        let csv = branch_csv(b, &run.basis)?;
        run.write(&format!("{name}.csv"), csv.as_bytes())?;
        for (p, state) in &b.samples {
            run.write_coeffs(&format!("{name}_{}.coeff.csv", param_tag(*p)), &state.coeffs)?;
        }
    }

    let opts = run.continuation();
    let mut report = String::from("branch,parameter,param_c,mu_re,jphi,partner,partner_gap,reason\n");
    let mut n_bif = 0;
    for b in branches.iter().filter(|b| b.label.is_vortex() && b.terminated_at.is_some()) {
        let reason = b.termination_reason.clone().unwrap_or_default();
        match locate_bifurcation(b, &run.basis, 1e-8, &opts) {
            Ok(bif) => {
                let partners: Vec<&SpectrumBranch> = branches.iter().filter(|p| !p.label.is_vortex()).collect();
                let partner = nearest_partner(bif.last_state.mu, bif.last_parameter, &partners, &run.basis, &opts.solver);
                let (pname, gap) = match partner {
                    Some((l, gap)) => (l.name().to_string(), format!("{gap:?}")),
                    None => ("none".into(), "nan".into()),
                };
                writeln!(
                    report,
                    "{},{},{:?},{:?},{:?},{},{},{}",
                    b.label,
                    b.parameter.name(),
                    bif.parameter,
                    bif.last_state.mu.re,
                    bif.last_state.j_phi,
                    pname,
                    gap,
                    reason.replace(',', ";")
                )
                .expect("string write");
                n_bif += 1;
            }
            Err(e) => run.note(format!("{}.bifurcation", b.label), e.to_string()),
        }
    }
    run.write("bifurcations.csv", report.as_bytes())?;

    let mut crossings = String::from("branch_a,branch_b,parameter,value\n");
    let mut n_cross = 0;
    let distinct: Vec<&SpectrumBranch> = branches.iter().filter(|b| b.label != BranchLabel::VortexMinus).collect();
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            for value in locate_crossings(a, b, &run.basis, 1e-8, &opts.solver) {
                writeln!(crossings, "{},{},{},{value:?}", a.label, b.label, a.parameter.name()).expect("string write");
                n_cross += 1;
            }
        }
    }
    run.write("crossings.csv", crossings.as_bytes())?;
    run.summary("branches", branches.len());
    run.summary("bifurcations", n_bif);
    run.summary("crossings", n_cross);
    Ok(())
}

fn cmd_stability(run: &mut Run, dump_spectra: bool) -> Outcome<()> {
    let mut labels = run.config.branches.clone();
    if labels.contains(&BranchLabel::VortexMinus) {
        labels.retain(|l| *l != BranchLabel::VortexMinus);
        run.note("vortex_minus", "spectrum is the conjugate of vortex_plus; not computed");
    }
    let branches = run_branches(run, &labels)?;
    let mut worst: f64 = 0.0;
    for b in &branches {
        let points = stability_sweep(b, &run.basis, run.config.stability_tol);
        let name = b.label.name();
        run.write(&format!("{name}_stability.csv"), stability_csv(&points).as_bytes())?;
        for pt in &points {
            match &pt.spectrum {
                Ok(s) => {
                    worst = worst.max(s.max_imag);
                    if dump_spectra {
                        run.write(&format!("{name}_{}.spectrum.csv", param_tag(pt.param)), spectrum_csv(&s.omegas).as_bytes())?;
                    }
                }
                Err(e) => run.note(format!("{name}.{}", param_tag(pt.param)), e.clone()),
            }
        }
    }
    run.summary("branches", branches.len());
    run.summary("max_imag", format!("{worst:?}"));
    Ok(())
}

fn cmd_evolve(run: &mut Run) -> Outcome<()> {
    let label = run.config.branch;
    let grid = run.config.grid;
    let (psi0, source) = match run.config.initial_state.clone() {
        Some(path) => {
            let field = read_gpe2(&path)?;
            if !field.grid.same_as(&grid) {
                return Err(Error::Config(vec![format!("propagation.initial_state: {} is not on the dynamics grid", path.display())]).into());
            }
            (field, path.display().to_string())
        }
        None => {
            let state = solve_requested(run, label)?;
            (run.basis.sample_on(&state.coeffs, grid)?.normalized(), label.name().to_string())
        }
    };
    let config = run.config.propagation.clone();
    let every = run.config.snapshot_every;
    let n_steps = config.n_steps;
    let out = run.out.clone();
    let mut snapshots = Vec::new();
    let ev = evolve_with(&psi0, &config, run.config.g, &run.config.potential, |step, _, psi| {
        if step == 0 || step == n_steps || (every > 0 && step % every == 0) {
            let name = format!("snapshot_{step:08}.gpe2");
            write_gpe2(&out.join(&name), psi)?;
            snapshots.push(name);
        }
        Ok(())
    })?;
    if ev.steps_taken != n_steps && !snapshots.iter().any(|s| s == &format!("snapshot_{:08}.gpe2", ev.steps_taken)) {
        let name = format!("snapshot_{:08}.gpe2", ev.steps_taken);
        write_gpe2(&out.join(&name), &ev.final_state)?;
        snapshots.push(name);
    }
    run.manifest.outputs.extend(snapshots);
    run.write("trajectory.csv", trajectory_csv(&ev.trajectory).as_bytes())?;
    if let Some(why) = &ev.trajectory.truncated {
        run.note("truncated", why.clone());
    }
    let last = ev.trajectory.len() - 1;
    run.summary("initial", source);
    run.summary("steps", ev.steps_taken);
    run.summary("norm", format!("{:?}", ev.trajectory.norms[last]));
    run.summary("overlap", format!("{:?}", ev.trajectory.overlaps[last]));
    Ok(())
}

fn cmd_precession(run: &mut Run) -> Outcome<()> {
    let gammas = match &run.config.sweep {
        Some(s) if s.parameter == SweepParameter::Gamma => s.values.clone(),
        Some(_) => return Err(Error::Config(vec!["sweep.parameter: precession sweeps gamma only".into()]).into()),
        None => vec![run.config.potential.gamma],
    };
    let p = &run.config.propagation;
    let opts = PrecessionOptions {
        g: run.config.g,
        dt: p.dt,
        grid: run.config.grid,
        record_every: p.record_every,
        absorbing_width: p.absorbing_width,
    };
    let (spec, x0, y0, t_end) = (run.config.potential.clone(), run.config.x0, run.config.y0, run.config.t_end);
    let results: Vec<_> =
        gammas.par_iter().map(|&gamma| (gamma, precession_experiment(&spec, gamma, x0, y0, t_end, &opts))).collect();
    for (gamma, result) in results {
        let traj = result?;
        let tag = param_tag(gamma);
        run.write(&format!("precession_{tag}.csv"), trajectory_csv(&traj).as_bytes())?;
        if let Some(why) = &traj.truncated {
            run.note(format!("gamma_{tag}.truncated"), why.clone());
        }
    }
    run.summary("trajectories", gammas.len());
    Ok(())
}

fn execute(cli: &Cli) -> Outcome<Vec<(String, String)>> {
    let started = Instant::now();
    let config = load(&cli.global)?;
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::Config(vec!["--threads must be >= 1".into()]).into());
        }
        // the global pool can only be set once per process
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let out = config.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    let basis = BasisSet::new(config.n_max, config.basis_grid)?;
    let command = match &cli.command {
        Command::Solve { .. } => "solve",
        Command::Spectrum => "spectrum",
        Command::Stability { .. } => "stability",
        Command::Evolve => "evolve",
        Command::Precession => "precession",
    };
    let manifest = RunManifest {
        command: command.into(),
        config: config.to_text(),
        build: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        seed: config.seed,
        ..RunManifest::default()
    };
    let mut run = Run { config, basis, out, manifest, summary: vec![("command".into(), command.into())] };
    match &cli.command {
        Command::Solve { branch } => cmd_solve(&mut run, *branch)?,
        Command::Spectrum => cmd_spectrum(&mut run)?,
        Command::Stability { dump_spectra } => cmd_stability(&mut run, *dump_spectra)?,
        Command::Evolve => cmd_evolve(&mut run)?,
        Command::Precession => cmd_precession(&mut run)?,
    }
    run.manifest.wall_time = started.elapsed().as_secs_f64();
    run.manifest.write(&run.out)?;
    let out = run.out.display().to_string();
    run.summary("out", out);
    Ok(run.summary)
}

fn print_line(pairs: &[(String, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}", line.join(" "));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            print_line(&summary);
            ExitCode::SUCCESS
        }
        Err(f) => {
            let code = f.exit_code();
            eprintln!("error: {}", f.message());
            print_line(&[("status".into(), "error".into()), ("exit_code".into(), code.to_string())]);
            ExitCode::from(code)
        }
    }
}
