use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lee_lbm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lee-lbm"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LEE_LBM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn stability_d1q3_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(&["stability", "--lattice", "d1q3", "--resolution", "64", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "stable");
    assert_eq!(v["set"], "D1Q3");
    assert!(v["samples"].as_array().unwrap().iter().all(|s| s["flags"][0] == "unitary"));
}

#[test]
fn stability_d3q19_is_certified_by_structure() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(&["stability", "--lattice", "d3q19", "--resolution", "6", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(v["structure"]["symmetry_defect"].as_f64().unwrap() <= 1e-10);
    assert!(v["samples"].as_array().unwrap().iter().any(|s| s["flags"].as_array().unwrap().is_empty()));
}

#[test]
fn convergence_d1q3_reaches_machine_precision() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(
        &["convergence", "--lattice", "d1q3", "--ic", "gauss1d", "--resolutions", "50,100,200", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let err: f64 = r.split(',').nth(5).unwrap().parse().unwrap();
        assert!(err <= 1e-12);
    }
}

#[test]
fn convergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(
        &["convergence", "--lattice", "d1q3", "--resolutions", "20,40", "--tau", "1", "--max-error", "1e-12"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "a relaxation-free set stays exact at any tau");
    let o = lee_lbm(
        &["convergence", "--lattice", "d2q5", "--resolutions", "10,20", "--fine-n", "40", "--min-order", "5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(
        &["run", "--lattice", "d2q5", "--ic", "gauss2d", "-N", "100", "--end-time", "1", "--snapshot-every", "10", "--out", "snaps"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> =
        fs::read_dir(dir.path().join("snaps")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    assert_eq!(names[0], "snapshot_000000.csv");
    assert_eq!(names[5], "snapshot_000050.csv");
    let text = fs::read_to_string(dir.path().join("snaps/snapshot_000050.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# t=1.0"));
    assert_eq!(lines.next().unwrap(), "x,y,rho,ux,uy,theta");
    assert_eq!(lines.count(), 100 * 100);
}

#[test]
fn run_accepts_snapshot_as_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(&["run", "--lattice", "d1q3", "-N", "40", "--end-time", "0.5", "--out", "a"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = lee_lbm(
        &["run", "--lattice", "d1q3", "--ic", "file:a/snapshot_000020.csv", "--end-time", "0.5", "--out", "b"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // D1Q3 is exact, so two half periods equal one full period of the pulse
    let o = lee_lbm(&["run", "--lattice", "d1q3", "-N", "40", "--end-time", "0", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let b = fs::read_to_string(dir.path().join("b/snapshot_000020.csv")).unwrap();
    let c = fs::read_to_string(dir.path().join("c/snapshot_000000.csv")).unwrap();
    let parse = |s: &str| -> Vec<f64> { s.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect() };
    let (pb, pc) = (parse(&b), parse(&c));
    assert!(pb.iter().zip(&pc).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn moments_check_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    for lattice in ["d2q5-diatomic", "d3q19"] {
        let o = lee_lbm(&["moments-check", "--lattice", lattice, "--trials", "50"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "lattice = \"d1q3\"\nresolutions = [20, 40]\nend_time = 0.5\n").unwrap();
    let o = lee_lbm(&["--config", "c.toml", "convergence"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\n40,"));
    fs::write(dir.path().join("bad.toml"), "latice = \"d1q3\"\n").unwrap();
    assert_eq!(lee_lbm(&["--config", "bad.toml", "convergence"], dir.path()).status.code(), Some(2));
}

#[test]
fn family_lattice_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(
        &["moments-check", "--lattice", "d3q-family", "--rho0", "1", "--theta0", "0.6", "--alpha", "0.075"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"D3Q9\""));
    let o = lee_lbm(&["moments-check", "--lattice", "d3q-family", "--rho0", "1", "--theta0", "0.2", "--alpha", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run"],
        vec!["run", "--lattice", "d2q5", "-N", "10", "--output", "vtk"],
        vec!["run", "--lattice", "d2q5", "--ic", "gauss3d", "-N", "10"],
        vec!["run", "--lattice", "d2q5", "--ic", "gauss2d", "-N", "10", "--length", "1"],
        vec!["stability", "--lattice", "d1q3", "--resolution", "1"],
        vec!["convergence", "--lattice", "d2q5", "--resolutions", "30", "--fine-n", "100"],
        vec!["bogus"],
    ] {
        assert_eq!(lee_lbm(&args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let ok = lee_lbm(
        &["run", "--lattice", "d2q5", "--ic", "gauss2d", "-N", "10", "--length", "1", "--allow-domain-mismatch", "--end-time", "0.1"],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn tau_warning_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = lee_lbm(&["run", "--lattice", "d1q3", "-N", "10", "--tau", "0.8"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn threads_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    for (t, out) in [("1", "one"), ("4", "four")] {
        let o = lee_lbm(&["run", "--lattice", "d3q19", "-N", "12", "--end-time", "0.5", "--threads", t, "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(dir.path().join("one/snapshot_000003.csv")).unwrap();
    let b = fs::read(dir.path().join("four/snapshot_000003.csv")).unwrap();
    assert_eq!(a, b);
}
