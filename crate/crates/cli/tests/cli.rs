use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voldist"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(config: &Path, prefix: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--output")
        .arg(prefix)
        .args(extra)
        .output()
        .unwrap()
}

fn report(prefix: &Path) -> Value {
    let text = std::fs::read_to_string(format!("{}.report.json", prefix.display())).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn assert_tolerances_complete(report: &Value) {
    let tolerances = report["tolerances"].as_object().unwrap();
    let configured = report["config"]["tolerances"].as_object().unwrap();
    for key in configured.keys() {
        let entry = &tolerances[key];
        assert!(entry.get("value").is_some() && entry.get("measured").is_some() && entry.get("pass").is_some(), "{key}");
    }
    for check in report["checks"].as_array().unwrap() {
        let key = check["tolerance_key"].as_str().unwrap();
        assert_eq!(tolerances[key]["pass"], Value::Bool(true), "{key}");
    }
}

#[test]
fn ball_config_reports_the_cap_oracle() {
    let prefix = scratch("ball").join("ball");
    let out = run(&configs().join("ball_voldist.json"), &prefix, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(&prefix);
    assert_eq!(r["pass"], Value::Bool(true));
    let point = &r["results"]["points"][0];
    assert!((point["v"].as_f64().unwrap() - 0.6544984694978736).abs() < 1e-10);
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 0.5 } else { 0.0 };
            assert!((point["Q"][i][j].as_f64().unwrap() - want).abs() < 1e-10);
        }
    }
    assert_eq!(r["config"]["points"][0][0].as_f64(), Some(0.5));
    assert_tolerances_complete(&r);

    let csv = std::fs::read_to_string(format!("{}.csv", prefix.display())).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# p0,p1,p2,v,b,"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), header.trim_start_matches("# ").split(',').count());
    // 17 significant digits: one leading digit and sixteen decimals
    assert_eq!(row[3], "6.5449846949787405e-1");
}

#[test]
fn cubic_graph_slope() {
    let prefix = scratch("c1").join("c1");
    let out = run(&configs().join("example_c1_asympt.json"), &prefix, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(&prefix);
    assert_eq!(r["pass"], Value::Bool(true));
    let q1 = &r["results"]["Q1"];
    assert!((q1[0][0].as_f64().unwrap() - 0.5).abs() < 0.01);
    assert!((q1[1][1].as_f64().unwrap() - 0.5).abs() < 0.01);
    assert!(q1[0][1].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(r["results"]["normalization"]["normal_form"]["c"].as_f64(), Some(1.0));
    assert_tolerances_complete(&r);

    let csv = std::fs::read_to_string(format!("{}.csv", prefix.display())).unwrap();
    assert!(csv.starts_with("# t,Q11,Q12,Q22,b,V,Zx,Zy,diag_ratio,conormal_err\n"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn paraboloid_validation_passes_with_identity_q() {
    let prefix = scratch("paraboloid").join("paraboloid");
    let out = run(&configs().join("paraboloid_validate.json"), &prefix, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(&prefix);
    assert_eq!(r["pass"], Value::Bool(true));
    for point in r["results"]["points"].as_array().unwrap() {
        let q = &point["Q"];
        assert!((q[0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((q[1][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(q[0][1].as_f64().unwrap().abs() < 1e-12);
    }
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for needed in ["moment identity", "hessian identity p[0]", "centroid defect p[0]", "affine covariance p[0]", "frame volume"] {
        assert!(names.contains(&needed), "{needed}");
    }
    assert_tolerances_complete(&r);
}

#[test]
fn validate_subcommand_prints_a_summary() {
    let out = bin().arg("validate").arg(configs().join("ball_voldist.json")).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["pass"], Value::Bool(true));
    assert!(summary["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = scratch("determinism");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for prefix in [&a, &b] {
        let out = run(&configs().join("paraboloid_validate.json"), prefix, &[]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let read = |p: &Path| std::fs::read(format!("{}.csv", p.display())).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn quadrature_overrides_are_echoed() {
    let prefix = scratch("override").join("ball");
    let out = run(&configs().join("ball_voldist.json"), &prefix, &["--circle-nodes", "128", "--depth-nodes", "32"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(&prefix);
    assert_eq!(r["config"]["quadrature"]["circle_nodes"].as_u64(), Some(128));
    assert_eq!(r["config"]["quadrature"]["depth_nodes"].as_u64(), Some(32));
}

#[test]
fn output_prefix_defaults_to_the_config_path() {
    let dir = scratch("prefix");
    let config = write_config(
        &dir,
        r#"{"body":{"type":"ellipsoid","center":[0,0,0],"linear":[[1,0,0],[0,1,0],[0,0,1]]},
            "task":"volume_distance","points":[[0.0,0.3,0.0]]}"#,
    );
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.join("config.csv").exists());
    assert!(dir.join("config.report.json").exists());
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = scratch("malformed");
    let config = write_config(&dir, r#"{"body": {"type": "ellipsoid", "#);
    let out = bin().arg("validate").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ConfigInvalid"));
}

#[test]
fn nonconvex_graph_is_rejected() {
    let dir = scratch("nonconvex");
    let config = write_config(
        &dir,
        r#"{"body":{"type":"quartic_graph","c":10.0,"a":[0,0,0,0,0],"domain_radius":0.8},
            "task":"validate","points":[[0.0,0.0,0.1]]}"#,
    );
    let out = bin().arg("validate").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("NotConvex"), "{}", stderr(&out));
}

#[test]
fn missing_task_fields_are_config_errors() {
    let dir = scratch("missing");
    let config = write_config(
        &dir,
        r#"{"body":{"type":"quartic_graph","c":1.0,"domain_radius":0.8},"task":"asymptotics"}"#,
    );
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outside_point_is_a_computation_failure() {
    let dir = scratch("outside");
    let config = write_config(
        &dir,
        r#"{"body":{"type":"ellipsoid","center":[0,0,0],"linear":[[1,0,0],[0,1,0],[0,0,1]]},
            "task":"volume_distance","points":[[2.0,0.0,0.0]]}"#,
    );
    let prefix = dir.join("out");
    let out = run(&config, &prefix, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("NotInside"));
    let r = report(&prefix);
    assert_eq!(r["error"]["name"].as_str(), Some("NotInside"));
    assert_eq!(r["pass"], Value::Bool(false));
}

#[test]
fn failed_check_exits_one() {
    let dir = scratch("failing");
    let config = write_config(
        &dir,
        r#"{"body":{"type":"ellipsoid","center":[0,0,0],"linear":[[1,0,0],[0,1,0],[0,0,1]]},
            "task":"volume_distance","points":[[0.5,0.0,0.0]],
            "tolerances":{"hessian_identity":1e-14}}"#,
    );
    let prefix = dir.join("out");
    let out = run(&config, &prefix, &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&prefix);
    assert_eq!(r["pass"], Value::Bool(false));
    assert_eq!(r["tolerances"]["hessian_identity"]["pass"], Value::Bool(false));
    assert_eq!(r["tolerances"]["hessian_identity"]["value"].as_f64(), Some(1e-14));
}
