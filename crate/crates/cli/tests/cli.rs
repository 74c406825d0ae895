use std::fs;
use std::path::Path;
use std::process::Command;

use monostab::checks::{run_suites, Suite, GOLDEN_DOGBONE_MASK};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monostab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_config(path: &Path) -> i32 {
    bin().arg("run").arg("--config").arg(path).status().unwrap().code().unwrap()
}

#[test]
fn fd2_run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let cfg = write_config(
            dir.path(),
            &format!("fd2_{k}.conf"),
            &format!("experiment = fd2\nhorizon = 5\noutput_dir = {}\n", out.display()),
        );
        assert_eq!(run_config(&cfg), 0);
        outputs.push(out);
    }
    for name in ["trajectory.csv", "states.csv", "summary.csv"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let states = fs::read_to_string(outputs[0].join("states.csv")).unwrap();
    assert_eq!(states.lines().nth(1).unwrap(), "0,2,-3,-0.7");
    assert!(outputs[0].join("timing.csv").exists());
}

#[test]
fn heat_run_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("heat");
    let cfg = write_config(
        dir.path(),
        "heat.conf",
        &format!(
            "experiment = heat\nn = 17\nhorizon = 0.1\nsnapshot_times = 0.05, 0.1\noutput_dir = {}\n",
            out.display()
        ),
    );
    assert_eq!(run_config(&cfg), 0);
    for f in ["snapshot_t0.05.csv", "snapshot_t0.1.csv", "control_t0.1.csv", "equilibrium.csv", "u_star.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let snap = fs::read_to_string(out.join("snapshot_t0.1.csv")).unwrap();
    assert!(snap.starts_with("i,j,x,y,value,mask\n"));
    assert_eq!(snap.lines().count(), 17 * 17 + 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.conf", "experiment = fd2\ncolour = blue\n");
    assert_eq!(run_config(&bad), 2);
    assert_eq!(run_config(&dir.path().join("missing.conf")), 2);
    let out = dir.path().join("fail");
    let failing = write_config(
        dir.path(),
        "fail.conf",
        &format!(
            "experiment = fd2\nfd2.x0 = -0.7, 2.5\ndt = 0.1\nhorizon = 1\nsolver.max_iter = 1\nsolver.tol = 1e-15\noutput_dir = {}\n",
            out.display()
        ),
    );
    assert_eq!(run_config(&failing), 3);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("solver failure"));

    let status = bin()
        .args(["check", "--suite", "nonsense", "--seed", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn geometry_check_and_mask_export() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["check", "--suite", "geometry", "--seed", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = fs::read_to_string(dir.path().join("check_geometry.csv")).unwrap();
    assert!(report.starts_with("check,system,statistic,value,pass\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")));

    let geom = write_config(dir.path(), "g.geom", "n = 20\nwave.gap_deg = 40\n");
    let out = dir.path().join("mask.csv");
    let status = bin().arg("mask").arg("--geometry").arg(&geom).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap(), GOLDEN_DOGBONE_MASK);

    let coarse = write_config(dir.path(), "c.geom", "n = 5\n");
    let status = bin().arg("mask").arg("--geometry").arg(&coarse).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn suite_reports_do_not_depend_on_thread_count() {
    let suites = [Suite::Geometry, Suite::Coercivity, Suite::Projection];
    let one = run_suites(&suites, 5, 1).unwrap();
    let three = run_suites(&suites, 5, 3).unwrap();
    assert_eq!(one, three);
    let alone = run_suites(&[Suite::Projection], 5, 1).unwrap();
    assert_eq!(&one[one.len() - alone.len()..], &alone[..]);
}
