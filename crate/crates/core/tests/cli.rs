use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const WORKSPACE: &str = r#"{
  "bisections": {
    "shift": {"type": "constant", "host": "T", "xi": [1.0], "base_box": [[-2.5, 1.5]]},
    "id": {"type": "identity", "host": "T", "base_box": [[-3, 3]]}
  },
  "kernels": {
    "move": {"atoms": [{"type": "dirac", "bisection": "shift", "coeff": "(1 - (x1 - 0.5)^2/4)^2"}]},
    "ident": {"atoms": [{"type": "dirac", "bisection": "id", "coeff": "1"}]},
    "blur": {"atoms": [{"type": "density", "host": "T", "expr": "3.989422804014327*exp(-xi1^2/0.02)",
                        "xi_box": [[-0.8, 0.8]], "base_box": [[-3, 3]]}]},
    "wide": {"atoms": [{"type": "density", "host": "T", "expr": "1", "xi_box": [[-1.5, 1.5]], "base_box": [[-3, 3]]}]}
  },
  "functions": {
    "bump": {"expr": "(1 - x1^2)^3", "support": [[-1, 1]]},
    "gauss": "exp(-x1^2)"
  },
  "checks": [
    {"kind": "equal", "name": "shift_is_not_identity", "lhs": "move", "rhs": "ident", "function": "bump",
     "grid": {"box": [[-1, 1]], "res": [9]}, "tolerance": 1e-9}
  ]
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leafwise"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn with_workspace(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("ws.json");
    std::fs::write(&cfg, WORKSPACE).unwrap();
    let mut full = vec!["--config", cfg.to_str().unwrap()];
    full.extend_from_slice(args);
    run(&full)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The single JSON line on stderr of a failed command.
fn error_line(o: &Output) -> Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    serde_json::from_str(lines[0]).expect("machine-readable error")
}

fn grid_values(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.trim().parse().unwrap()).collect()
}

fn leaf_points(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect()
}

#[test]
fn rotation_leaf_stays_on_the_circle() {
    let o = run(&["leaf", "--foliation", "R", "--point", "1,0", "--budget", "400"]);
    assert!(o.status.success());
    let pts = leaf_points(&stdout(&o));
    assert!(pts.len() > 100);
    for p in pts {
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() <= 1e-6, "{p:?}");
    }
}

#[test]
fn scaling_leaf_through_origin_is_a_point() {
    let o = run(&["leaf", "--foliation", "S", "--point", "0"]);
    assert!(o.status.success());
    assert_eq!(leaf_points(&stdout(&o)), vec![vec![0.0]]);
}

#[test]
fn unknown_foliation_exits_2_naming_it() {
    let o = run(&["leaf", "--foliation", "Q", "--point", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("'Q'"));
}

#[test]
fn leaf_output_is_reproducible_for_a_seed() {
    let a = run(&["--seed", "11", "leaf", "--foliation", "R", "--point", "0,1.5", "--budget", "200"]);
    let b = run(&["--seed", "11", "leaf", "--foliation", "R", "--point", "0,1.5", "--budget", "200"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--seed", "12", "leaf", "--foliation", "R", "--point", "0,1.5", "--budget", "200"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn leaf_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("leaf.svg");
    let o = run(&["leaf", "--foliation", "R", "--point", "1,0", "--budget", "50", "--svg", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(svg).unwrap().contains("<circle"));
}

#[test]
fn flow_reports_endpoint_and_jacobian() {
    let o = run(&["flow", "--foliation", "S", "--xi", "1", "--point", "0.5", "--jacobian"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e = std::f64::consts::E;
    assert!((v["endpoint"][0].as_f64().unwrap() - 0.5 * e).abs() < 1e-8);
    assert!((v["jacobian"][0][0].as_f64().unwrap() - e).abs() < 1e-7);
}

#[test]
fn flow_escape_exits_3() {
    let o = run(&["flow", "--foliation", "S", "--xi", "1", "--point", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["error"], "domain_escape");
}

#[test]
fn identity_kernel_returns_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["apply", "--kernel", "ident", "--function", "bump", "--box", "-1.2:1.2", "--res", "25"]);
    assert!(o.status.success());
    for (i, v) in grid_values(&stdout(&o)).iter().enumerate() {
        let x: f64 = -1.2 + 0.1 * i as f64;
        let f = if x.abs() < 1.0 { (1.0 - x * x).powi(3) } else { 0.0 };
        assert!((v - f).abs() <= 1e-9, "x={x}: {v} vs {f}");
    }
}

#[test]
fn translation_moves_the_bump_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["apply", "--kernel", "move", "--function", "bump", "--box", "-1:3", "--res", "41"]);
    assert!(o.status.success());
    for (i, v) in grid_values(&stdout(&o)).iter().enumerate() {
        let x: f64 = -1.0 + 0.1 * i as f64;
        let c = (1.0 - (x - 0.5).powi(2) / 4.0).powi(2);
        let c = if (-1.5..=2.5).contains(&x) { c } else { 0.0 };
        let y = x - 1.0;
        let f = if y.abs() < 1.0 { (1.0 - y * y).powi(3) } else { 0.0 };
        assert!((v - c * f).abs() <= 1e-9, "x={x}: {v} vs {}", c * f);
    }
}

#[test]
fn gaussian_density_matches_closed_form_smoothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["apply", "--kernel", "blur", "--function", "gauss", "--box", "-2:2", "--res", "21"]);
    assert!(o.status.success());
    // Gaussians of variance 1/2 and 1/100 convolve to variance 51/100.
    for (i, v) in grid_values(&stdout(&o)).iter().enumerate() {
        let y: f64 = -2.0 + 0.2 * i as f64;
        let expect = (0.5f64 / 0.51).sqrt() * (-y * y / 1.02).exp();
        assert!((v - expect).abs() <= 1e-6, "y={y}: {v} vs {expect}");
    }
}

#[test]
fn masked_points_are_nan_and_strict_mode_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["apply", "--kernel", "wide", "--function", "gauss", "--box", "-3:3", "--res", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nan"));
    let summary: Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().trim()).unwrap();
    assert_eq!(summary["masked"].as_u64().unwrap() as usize, text.matches("nan").count());

    let o = with_workspace(dir.path(), &["--strict", "apply", "--kernel", "wide", "--function", "gauss", "--box", "-3:3", "--res", "7"]);
    assert_eq!(o.status.code(), Some(3));
    error_line(&o);
}

#[test]
fn apply_then_plot_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let o = with_workspace(
        dir.path(),
        &["--out", csv.to_str().unwrap(), "apply", "--kernel", "wide", "--function", "gauss", "--box", "-3:3", "--res", "13"],
    );
    assert!(o.status.success());
    let svg = dir.path().join("g.svg");
    let o = run(&["plot", "--input", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(svg).unwrap().matches("<polyline").count(), 1);
}

#[test]
fn convolve_apply_agrees_with_composition() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(
        dir.path(),
        &["convolve-apply", "--left", "blur", "--right", "move", "--function", "bump", "--box", "-1:2", "--res", "13", "--compare"],
    );
    assert!(o.status.success());
    let summary: Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().trim()).unwrap();
    assert!(summary["max_abs_diff"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn info_lists_canonical_and_user_objects() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["info"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for name in ["T", "R", "S", "C", "N"] {
        assert!(v["foliations"][name].is_object());
    }
    assert_eq!(v["kernels"]["blur"]["side"], "r");
    assert_eq!(v["checks"], 1);
}

#[test]
fn verify_composition_passes() {
    let o = run(&["verify", "composition"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    for c in v["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "pass", "{c}");
        for key in ["check", "measured", "tolerance"] {
            assert!(c.get(key).is_some());
        }
    }
}

#[test]
fn verify_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_workspace(dir.path(), &["verify", "config"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = &v["checks"][0];
    assert_eq!(c["status"], "fail");
    assert!(c["measured"].as_f64().unwrap() > c["tolerance"].as_f64().unwrap());
}

#[test]
fn unknown_suite_exits_2() {
    let o = run(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    error_line(&o);
}

#[test]
fn malformed_inputs_give_single_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"kernels\": ").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--config", bad.to_str().unwrap(), "info"],
        vec!["--config", "/nonexistent/ws.json", "info"],
        vec!["leaf", "--foliation", "R", "--point", "1,zero"],
        vec!["--quad-order", "1", "info"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        error_line(&o);
    }
}
