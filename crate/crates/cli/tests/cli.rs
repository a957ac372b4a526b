use std::path::PathBuf;
use std::process::{Command, Output};

fn rankone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankone")).args(args).env_remove("RANKONE_OUT").output().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("rankone-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn threshold_prints_one_plus_sqrt_two() {
    let o = rankone(&["tn", "threshold"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o.stdout);
    assert_eq!(v["display"], "2.414214");
    assert!((v["threshold"].as_f64().unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-6);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn exit_codes_follow_the_contract() {
    let o = rankone(&["tn", "large-t5", "--c", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["verdict"], true);
    // a = 2.25 < 4: no certificate is a negative answer, not an error.
    let o = rankone(&["tn", "check", "--family", "t4", "--c", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o.stdout)["verdict"], false);
    assert!(o.stderr.is_empty());
    let o = rankone(&["tn", "check", "--family", "t4", "--c", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn errors_are_json_on_stderr_with_exit_two() {
    for (args, kind) in [
        (&["tn", "check", "--c", "0.5"][..], "invalid_input"),
        (&["tn", "nope"][..], "usage"),
        (&["heis", "lift", "--family", "scaling", "--grid", "8"][..], "not_area_preserving"),
        (&["analyze", "field", "--family", "bogus"][..], "invalid_input"),
        (&["laminate", "push", "--laminate", "/nonexistent.json"][..], "io"),
        (&["synth", "realize", "--delta=-1"][..], "invalid_input"),
    ] {
        let o = rankone(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let e = json(&o.stderr);
        assert_eq!(e["error"], kind, "{args:?}");
        assert!(e["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn manifest_lists_artifacts_with_digests() {
    let out = tmp("manifest");
    let o = rankone(&["laminate", "build", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m = json(&std::fs::read(out.join("manifest.json")).unwrap());
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["command"], serde_json::json!(["laminate", "build"]));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["laminate.json", "laminate.csv"]);
    let csv = std::fs::read_to_string(out.join("laminate.csv")).unwrap();
    assert!(csv.starts_with("weight,m11,m12,m21,m22,det,dist_l1,dist_l2\n"));

    // The bundle feeds synthesis and push, and inputs are recorded.
    let bundle = out.join("laminate.json");
    let out2 = tmp("realize");
    let o = rankone(&["synth", "realize", "--laminate", bundle.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&std::fs::read(out2.join("manifest.json")).unwrap());
    assert_eq!(m["inputs"][0]["path"], bundle.to_str().unwrap());
    let svg = std::fs::read_to_string(out2.join("cells.svg")).unwrap();
    assert!(svg.contains(r#"version="1.1""#));
    let o = rankone(&["laminate", "push", "--laminate", bundle.to_str().unwrap(), "--by", "swap"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["barycenter"], serde_json::json!([[0.25, 0.0], [0.25, 0.0]]));
    std::fs::remove_dir_all(&out).unwrap();
    std::fs::remove_dir_all(&out2).unwrap();
}

#[test]
fn flags_take_precedence_over_the_config_file() {
    let dir = tmp("config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "[budgets]\ngrid = 16\n[formats]\ncsv = false\n").unwrap();
    let o = rankone(&["analyze", "defect", "--j", "2", "--config", cfg.to_str().unwrap()]);
    assert_eq!(json(&o.stdout)["counts"], serde_json::json!([1, 16, 16, 1]));
    let out = dir.join("out");
    let o = rankone(&["analyze", "defect", "--j", "2", "--config", cfg.to_str().unwrap(), "--grid", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["counts"], serde_json::json!([1, 8, 8, 1]));
    assert!(!out.join("defect.csv").exists());
    assert!(out.join("defect.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn out_directory_can_come_from_the_environment() {
    let out = tmp("env");
    let o = Command::new(env!("CARGO_BIN_EXE_rankone"))
        .args(["tn", "threshold"])
        .env("RANKONE_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("tn_threshold.json").exists());
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn defect_and_lift_rows() {
    let o = rankone(&["analyze", "defect", "--family", "oscillation", "--j", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o.stdout);
    assert!(v["split_defect"]["defect"].as_f64().unwrap() >= v["lower_bound"].as_f64().unwrap());
    assert_eq!(v["meets_upper_bound"], true);
    let o = rankone(&["heis", "lift", "--family", "shear", "--grid", "128"]);
    let v = json(&o.stdout);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1]["order"].as_f64().unwrap() >= 1.9);
    let o = rankone(&["heis", "check", "--family", "rotation", "--grid", "32", "--node", "3,4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["report"]["planar_class"], "L2");
}
