use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_periodic-inclusions"));
    c.env_remove("PERIODIC_INCLUSIONS_OUT");
    c
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
        .to_string_lossy()
        .into_owned()
}

#[test]
fn solve_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let res = bin()
        .args(["solve", &scenario("cos_periodic"), "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let dir = out.path().join("cos_periodic");
    for f in ["trajectory.csv", "forcing.csv", "report.json", "diagnostics.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(!dir.join("failure.json").exists());
}

#[test]
fn env_var_sets_default_root() {
    let out = tempfile::tempdir().unwrap();
    let res = bin()
        .args(["solve", "builtin:cauchy_decay"])
        .env("PERIODIC_INCLUSIONS_OUT", out.path())
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(out.path().join("cauchy_decay/trajectory.csv").is_file());
}

#[test]
fn batch_runs_are_identical_to_single_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let names = ["cauchy_decay", "convex_interval", "extremal_interval", "relaxation_benchmark"];
    let configs: Vec<String> = names.iter().map(|n| scenario(n)).collect();
    let res = bin().arg("solve").args(&configs).args(["--jobs", "3", "--out"]).arg(a.path()).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    for c in &configs {
        assert!(bin().args(["solve", c, "--out"]).arg(b.path()).status().unwrap().success());
    }
    for n in names {
        for f in ["trajectory.csv", "forcing.csv", "report.json", "diagnostics.json"] {
            let x = std::fs::read(a.path().join(n).join(f)).unwrap();
            let y = std::fs::read(b.path().join(n).join(f)).unwrap();
            assert!(x == y, "{n}/{f} differs");
        }
    }
}

#[test]
fn duplicate_output_dirs_are_rejected() {
    let out = tempfile::tempdir().unwrap();
    let c = scenario("cauchy_decay");
    let res = bin().args(["solve", &c, &c, "--out"]).arg(out.path()).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_nonzero_with_failure_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slow.toml");
    let src = std::fs::read_to_string(scenario("cubic_regularized"))
        .unwrap()
        .replace("outer_max = 20000", "outer_max = 2");
    std::fs::write(&cfg, src).unwrap();
    let res = bin().arg("solve").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cubic_regularized/failure.json")).unwrap())
            .unwrap();
    assert_eq!(doc["status"], "failed");
    assert_eq!(doc["kind"], "outer_nonconvergence");
    assert!(doc["stages"][0].as_str().unwrap().starts_with("eps="));
}

#[test]
fn validate_reports_field_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let src = std::fs::read_to_string(scenario("cubic_regularized")).unwrap().replace("p = 4.0", "p = 1.5");
    std::fs::write(&cfg, src).unwrap();
    let res = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("op.p"));

    let ok = bin().args(["validate", &scenario("parabolic_p4")]).output().unwrap();
    assert!(ok.status.success());
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("status: verified"), "{text}");
    assert!(text.contains("default "));
}

#[test]
fn oracle_prints_values() {
    let res = bin().args(["oracle", "cos_periodic"]).output().unwrap();
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("u(0) = 5.0000000000000000e-1"));
    let list = bin().arg("oracle").output().unwrap();
    assert!(String::from_utf8_lossy(&list.stdout).lines().any(|l| l == "stationary_heat"));
    assert_eq!(bin().args(["oracle", "nope"]).status().unwrap().code(), Some(2));
}
