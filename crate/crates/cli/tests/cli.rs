use std::path::Path;
use std::process::{Command, Output};

fn ptvortex(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptvortex"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run ptvortex")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(line: &str, key: &str) -> Option<String> {
    line.split_whitespace().find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn manifest_outputs(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("manifest.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.strip_prefix("output = ").map(str::to_string))
        .collect()
}

#[test]
fn solve_linear_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(dir.path(), &["solve", "--set", "g=0", "--set", "potential.kind=A", "--set", "basis.n_max=6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let mu: f64 = field(&line, "mu_re").unwrap().parse().unwrap();
    assert!((mu - 2.0).abs() < 1e-10);
    let outputs = manifest_outputs(dir.path());
    for name in ["ground.coeff.csv", "ground.gpe2", "ground_current.gpe2", "potential.gpe2", "ground_observables.csv"] {
        assert!(outputs.iter().any(|o| o == name), "{name} not listed");
        assert!(dir.path().join(name).exists());
    }
    let obs = std::fs::read_to_string(dir.path().join("ground_observables.csv")).unwrap();
    assert!(obs.starts_with("branch,g,gamma"));
}

#[test]
fn solve_vortex_has_current() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(dir.path(), &["solve", "--branch", "vortex_plus", "--set", "g=1", "--set", "potential.kind=A", "--set", "potential.gamma=1"]);
    assert!(o.status.success());
    let j: f64 = field(&stdout(&o), "jphi").unwrap().parse().unwrap();
    assert!(j > 1.0);
}

#[test]
fn vortex_beyond_bifurcation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(dir.path(), &["solve", "--branch", "vortex_plus", "--set", "g=1", "--set", "potential.kind=A", "--set", "potential.gamma=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(field(&stdout(&o), "exit_code").as_deref(), Some("2"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(dir.path(), &["solve", "--set", "g=1", "--set", "potential.kind=Q", "--set", "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("potential.kind") && err.contains("bogus"));
    let o = ptvortex(dir.path(), &["solve", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = ptvortex(&blocker.join("sub"), &["solve", "--set", "g=0", "--set", "potential.kind=A", "--set", "basis.n_max=4"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn blow_up_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--set", "g=0", "--set", "potential.kind=A", "--set", "basis.n_max=4"];
    let o = ptvortex(dir.path(), &[&["solve"][..], &base].concat());
    assert!(o.status.success());
    let init = format!("propagation.initial_state={}", dir.path().join("ground.gpe2").display());
    let o = ptvortex(
        &dir.path().join("run"),
        &[&["evolve", "--set", &init, "--set", "potential.gamma=1e300", "--set", "propagation.n_steps=3"][..], &base].concat(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn spectrum_reports_crossing_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "g = 1\npotential.kind = C\npotential.gamma = 2\nsweep.parameter = d\nsweep.start = 1.2\nsweep.stop = 1.5\nsweep.step = 0.1\nspectrum.branches = excited_x,excited_y\n",
    )
    .unwrap();
    let o = ptvortex(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("crossings.csv")).unwrap();
    let d: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((d - 1.37).abs() < 0.05, "crossing at {d}");
    let branch = std::fs::read_to_string(dir.path().join("excited_x.csv")).unwrap();
    assert!(branch.starts_with("param,mu_re,mu_im,Ekin,Epot_re,Epot_im,Jphi,norm_residual"));
    assert_eq!(branch.lines().count(), 5);
    assert!(dir.path().join("excited_y_1.300000.coeff.csv").exists());
}

#[test]
fn stability_is_deterministic_single_threaded() {
    let run = |dir: &Path| {
        let o = ptvortex(
            dir,
            &["stability", "--dump-spectra", "--threads", "1", "--set", "g=1", "--set", "potential.kind=B", "--set", "basis.n_max=6",
              "--set", "sweep.parameter=gamma", "--set", "sweep.values=0,0.5,1", "--set", "spectrum.branches=ground,vortex_plus,vortex_minus"],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.join("vortex_plus_stability.csv")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ta, tb) = (run(a.path()), run(b.path()));
    assert_eq!(ta, tb);
    assert!(ta.starts_with("param,max_imag,n_unstable_modes"));
    assert_eq!(ta.lines().count(), 4);
    assert!(!a.path().join("vortex_minus_stability.csv").exists());
    assert!(a.path().join("ground_0.500000.spectrum.csv").exists());
}

#[test]
fn evolve_zero_steps_writes_initial_snapshot_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(dir.path(), &["evolve", "--set", "g=1", "--set", "potential.kind=A", "--set", "basis.n_max=6", "--set", "propagation.n_steps=0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snaps: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snapshot_"))
        .collect();
    assert_eq!(snaps.len(), 1);
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2);
}

#[test]
fn evolve_same_seed_same_bytes() {
    let run = |dir: &Path| {
        let o = ptvortex(
            dir,
            &["evolve", "--seed", "5", "--set", "g=1", "--set", "potential.kind=A", "--set", "basis.n_max=6", "--set", "propagation.n_steps=20",
              "--set", "propagation.noise_amplitude=0.01", "--set", "propagation.snapshot_every=10"],
        );
        assert!(o.status.success());
        (std::fs::read(dir.join("trajectory.csv")).unwrap(), std::fs::read(dir.join("snapshot_00000010.gpe2")).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn precession_writes_one_trajectory_per_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptvortex(
        dir.path(),
        &["precession", "--set", "g=1", "--set", "potential.kind=C", "--set", "basis.n_max=4", "--set", "precession.t_end=0.05",
          "--set", "sweep.parameter=gamma", "--set", "sweep.values=0,0.5,0.8"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for g in ["0.000000", "0.500000", "0.800000"] {
        let t = std::fs::read_to_string(dir.path().join(format!("precession_{g}.csv"))).unwrap();
        assert!(t.starts_with("t,x,y,norm,overlap"));
        assert_eq!(t.lines().count(), 52);
    }
    assert_eq!(manifest_outputs(dir.path()).len(), 3);
}
