use std::process::{Command, Output};

use isolab::family::perturbed_clifford;
use serde_json::Value;

fn isolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn tight_clifford_passes_with_four_points_per_pole() {
    let out = isolab(&[
        "tight",
        "--family",
        "clifford",
        "--params",
        r#"{"k":1,"n":2}"#,
        "--level",
        "0.3",
        "--poles",
        "20",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_stdout(&out);
    assert_eq!(report["pass"], true);
    let poles = report["report"]["poles"].as_array().unwrap();
    assert_eq!(poles.len(), 20);
    assert!(poles
        .iter()
        .all(|p| p["count_newton"] == 4 && p["count_circle"] == 4));
    assert_eq!(report["config"]["params"]["k"], 1);
}

#[test]
fn verify_cartan_cubic() {
    let out = isolab(&["verify", "--family", "cartan-cubic"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_stdout(&out);
    assert!(report["report"]["worst_scaled"].as_f64().unwrap() < 1e-9);
}

#[test]
fn perturbed_polynomial_rejected_before_tightness() {
    let params = serde_json::to_string(&perturbed_clifford(1e-3)).unwrap();
    let out = isolab(&[
        "tight",
        "--family",
        "user-polynomial",
        "--params",
        &params,
        "--poles",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verification failed"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        isolab(&["verify", "--family", "torus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        isolab(&[
            "verify",
            "--family",
            "user-polynomial",
            "--params",
            "{\"terms\": 3}"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        isolab(&["verify", "--params", "not json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        isolab(&["spectrum", "--level", "1.0"]).status.code(),
        Some(2)
    );
    assert_eq!(isolab(&["tight", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(
        isolab(&["verify", "--format", "obj"]).status.code(),
        Some(2)
    );
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "spectrum",
        "--family",
        "nomizu-quartic",
        "--level",
        "-0.2",
        "--samples",
        "10",
        "--seed",
        "9",
    ];
    let a = isolab(&args);
    let b = isolab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let args = [
        "tight",
        "--family",
        "cartan-cubic",
        "--level",
        "0.2",
        "--poles",
        "3",
        "--seed",
        "4",
    ];
    assert_eq!(isolab(&args).stdout, isolab(&args).stdout);
}

#[test]
fn spectrum_csv_rows() {
    let out = isolab(&[
        "spectrum",
        "--family",
        "cartan-cubic",
        "--level",
        "0",
        "--samples",
        "5",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("level,index,lambda_1,lambda_2,lambda_3,mult_1,mult_2,mult_3")
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn focal_subcommand_passes() {
    let out = isolab(&[
        "focal",
        "--family",
        "clifford",
        "--params",
        r#"{"k":1,"n":3}"#,
        "--samples",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_stdout(&out);
    let dims = report["report"]["dimensions"].as_array().unwrap();
    assert_eq!(dims[0]["estimated"], 1);
    assert_eq!(dims[1]["estimated"], 2);
}

#[test]
fn taut_focal_and_totally_focal() {
    let out = isolab(&[
        "taut-focal",
        "--family",
        "cartan-cubic",
        "--side",
        "-1",
        "--poles",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = isolab(&[
        "totally-focal",
        "--family",
        "clifford",
        "--poles",
        "4",
        "--focal-poles",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_stdout(&out)["report"]["focal_all_degenerate"], true);
}

#[test]
fn export_mesh_writes_obj() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("torus.obj");
    let out = isolab(&[
        "export-mesh",
        "--family",
        "clifford",
        "--resolution",
        "16",
        "--out",
        path.to_str().unwrap(),
        "--centers",
        "3",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let obj = std::fs::read_to_string(&path).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 256);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 512);
}

#[test]
fn export_mesh_near_pole_warns() {
    let h = 0.5f64.sqrt().to_string();
    let pole = format!("{h},0,{h},0");
    let out = isolab(&["export-mesh", "--resolution", "8", "--pole", &pole]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("g clipped"));
}

#[test]
fn export_mesh_higher_dimension_is_point_cloud() {
    let out = isolab(&[
        "export-mesh",
        "--family",
        "cartan-cubic",
        "--level",
        "0.1",
        "--resolution",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x1,x2,x3,x4,x5\n"));
    assert_eq!(text.lines().count(), 17);
    assert_eq!(
        isolab(&["export-mesh", "--family", "cartan-cubic", "--format", "obj"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn export_curves_csv() {
    let out = isolab(&[
        "export-curves",
        "--family",
        "nomizu-quartic",
        "--samples",
        "2",
        "--resolution",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("base,t,v,side\n"));
    assert_eq!(text.lines().count(), 33);
}
