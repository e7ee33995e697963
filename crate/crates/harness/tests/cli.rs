use std::path::Path;
use std::process::{Command, Output};

fn catou(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catou")).args(args).arg("--out").arg(out).output().expect("failed to launch catou")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_svg(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

#[test]
fn unknown_check_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = catou(&["verify", "no-such-check", "--seed", "1"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown check"));
}

#[test]
fn seed_is_mandatory() {
    let d = tempfile::tempdir().unwrap();
    let o = catou(&["verify", "dual-convergence"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn list_prints_every_check() {
    let d = tempfile::tempdir().unwrap();
    let o = catou(&["verify", "list"], d.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in catou_harness::checks::names() {
        assert!(text.contains(name), "{name} missing from list");
    }
}

#[test]
fn single_check_writes_report_table_and_plot() {
    let d = tempfile::tempdir().unwrap();
    let o = catou(&["verify", "dual-convergence", "--seed", "3"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["checks"][0]["name"], "dual-convergence");
    assert!(report["config"]["checks"]["dual_convergence"]["dts"].is_array());
    assert!(d.path().join("timing.json").exists());
    let csv = std::fs::read_to_string(d.path().join("dual-convergence.csv")).unwrap();
    assert!(csv.starts_with("dt,"));
    assert_svg(&d.path().join("dual-convergence.svg"));
}

#[test]
fn failing_check_gives_exit_code_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "checks": {"dual_convergence": {"ratio_band": [0.5, 1.0]}}}"#).unwrap();
    let o = catou(&["verify", "dual-convergence", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL dual-convergence"));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "checks": {"dual_convergence": {"ratio": 4}}}"#).unwrap();
    let o = catou(&["verify", "dual-convergence", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("invalid configuration"));
}

#[test]
fn invalid_parameter_values_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "dual": {"beta": 1.5}}"#).unwrap();
    let o = catou(&["solve-dual", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_and_plot() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 9, "simulate": {"n_scale": 20, "horizon": 0.2, "dt": 0.05}}"#).unwrap();
    let o = catou(&["simulate-sbm", "--config", cfg.to_str().unwrap(), "--replicas", "2"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let paths = std::fs::read_to_string(d.path().join("catalyst.csv")).unwrap();
    assert!(paths.starts_with("replica,time_index,time,particle_index,x1"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("catalyst.json")).unwrap()).unwrap();
    assert_eq!(meta["replicas"], 2);

    let mass = d.path().join("catalyst_mass.csv");
    let o = catou(&["plot", mass.to_str().unwrap(), "--x", "time", "--y", "total_mass"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_svg(&d.path().join("catalyst_mass.svg"));

    let o = catou(&["plot", mass.to_str().unwrap(), "--x", "time", "--y", "nope"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dual_field_and_moment_tables() {
    let d = tempfile::tempdir().unwrap();
    let o = catou(&["solve-dual", "--seed", "1"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("dual.csv").exists());
    assert_svg(&d.path().join("dual.svg"));

    let o = catou(&["sample-field", "--seed", "1", "--replicas", "4"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = std::fs::read_to_string(d.path().join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 5);

    let o = catou(&["moments", "--seed", "1"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(d.path().join("moments.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4 * 3);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = catou(&["verify", "sbm-total-mass-laplace", "--seed", "11", "--replicas", "300"], d.path());
        assert!(o.status.code().is_some());
    }
    for f in ["report.json", "sbm-total-mass-laplace.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
