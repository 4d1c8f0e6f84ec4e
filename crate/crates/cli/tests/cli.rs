use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypermod"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn step1_writes_record_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("euclidean_linear.toml");
    let o = run(&["step1", "--config", cfg.to_str().unwrap(), "--budget", "20000", "--plot"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["step1.record.json", "step1.report.json", "step1.report.md", "step1.modulus.csv", "step1.modulus.svg"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("step1.record.json")).unwrap()).unwrap();
    assert_eq!(rec["p"], 3);
    assert!((rec["t"].as_f64().unwrap() - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn same_config_same_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("porosity_clamp.toml");
    for d in [&a, &b] {
        let o = run(&["porosity", "--config", cfg.to_str().unwrap(), "--seed", "11", "--plot"], d.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["porosity.record.json", "porosity.modulus.csv", "porosity.modulus.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let strip = |d: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("porosity.report.json")).unwrap()).unwrap();
        v["wall_time_s"] = 0.into();
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn verify_space_on_the_star_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify-space", "--model", "star_tree", "--trials", "5000"], tmp.path());
    assert_eq!(code(&o), 0);
    let md = fs::read_to_string(tmp.path().join("verify-space.report.md")).unwrap();
    assert!(md.contains("PASS") && md.contains("retraction.lipschitz"));
}

#[test]
fn missing_mu_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[space]\nmodel = \"euclidean\"\ndimension = 1\n[modulus]\nvariant = \"linear\"\n[scalars]\ns = 1.0\neps = 0.5\n",
    );
    let o = run(&["step1", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu"));
    assert_eq!(code(&run(&["step1", "--config", "/nonexistent.toml"], tmp.path())), 2);
}

#[test]
fn unbounded_porosity_centre_is_a_construction_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[space]\nmodel = \"euclidean\"\ndimension = 1\n[modulus]\nvariant = \"linear\"\n[map]\npreset = \"identity\"\n[scalars]\ns = 1.0\neps = 0.5\n",
    );
    assert_eq!(code(&run(&["porosity", "--config", cfg.to_str().unwrap()], tmp.path())), 3);
}

#[test]
fn expansive_map_fails_its_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[space]\nmodel = \"euclidean\"\ndimension = 1\n[modulus]\nvariant = \"linear\"\n[map]\npreset = \"dilation\"\nfactor = 2.0\n[scalars]\ns = 1.0\n[budgets]\nestimate = 2000\ngrid = 4\n",
    );
    let o = run(&["estimate-modulus", "--config", cfg.to_str().unwrap(), "--plot"], tmp.path());
    assert_eq!(code(&o), 1);
    let csv = fs::read_to_string(tmp.path().join("estimate-modulus.modulus.csv")).unwrap();
    let svg = fs::read_to_string(tmp.path().join("estimate-modulus.modulus.svg")).unwrap();
    assert_eq!(csv.lines().count() - 1, svg.matches("<circle").count());
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["dtheta", "--trials", "10", "--out-dir"])
        .arg(tmp.path())
        .env("HYPERMOD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = bin()
        .args(["dtheta", "--trials", "50", "--out-dir"])
        .arg(tmp.path())
        .env("HYPERMOD_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
