use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn evonas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evonas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

const CONFIG: &str = r#"{
  "space": { "num_layers": 6, "num_choices": 3 },
  "evaluator": { "kind": "landscape", "seed": 1, "unary_scale": 0.5, "pairwise_scale": 1.0 },
  "strategies": [
    { "name": "rs", "kind": "random", "budget": 30, "topk_report": 3 },
    { "name": "ea", "kind": "ea", "init_population": 10, "survivor_count": 5,
      "mutation_prob": 0.2, "batch_size": 5, "total_budget": 30,
      "init_method": { "nsdi": { "population_size": 10, "aps_max": 2, "timeout": 100 } },
      "topk_report": 3 }
  ],
  "seeds": [1, 2]
}"#;

#[test]
fn mmd_of_a_sample_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0.5,1.0\n-1.0,2.0\n3.0,0.0\n1.5,-0.5\n");
    let a = a.to_str().unwrap();
    for kernel in ["rbf", "linear"] {
        let out = evonas(&["mmd", a, a, "--kernel", kernel]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        for key in ["mmd_biased", "mmd_unbiased_as_printed"] {
            assert!(v[key].as_f64().unwrap().abs() <= 1e-10, "{kernel} {key}");
        }
    }
}

#[test]
fn linear_mmd_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    // means (1, 1) and (3, 2): biased linear MMD is |mu_a - mu_b|^2 = 4 + 1
    let a = write(dir.path(), "a.csv", "0,0\n2,2\n");
    let b = write(dir.path(), "b.csv", "3,1\n3,3\n");
    let out = evonas(&["mmd", a.to_str().unwrap(), b.to_str().unwrap(), "--kernel", "linear"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["kernel"], "linear");
    assert!(v["bandwidth"].is_null());
    assert!((v["mmd_biased"].as_f64().unwrap() - 5.0).abs() <= 1e-12);
    // U-statistic drops the diagonal: k(a1,a2) = 0, k(b1,b2) = 12, cross sum 20
    let u = 2.0 * 0.0 / 2.0 + 2.0 * 12.0 / 2.0 - 2.0 * 20.0 / 4.0;
    assert!((v["mmd_unbiased_u_statistic"].as_f64().unwrap() - u).abs() <= 1e-12);
}

#[test]
fn explicit_bandwidth_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n1\n");
    let b = write(dir.path(), "b.csv", "2\n");
    let out = evonas(&["mmd", a.to_str().unwrap(), b.to_str().unwrap(), "--bandwidth", "1.5"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["bandwidth"].as_f64(), Some(1.5));
    assert_eq!(v["n_b"], 1);
    assert!(v["mmd_unbiased_u_statistic"].is_null());
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = evonas(&["mmd", "/nonexistent/a.csv", "/nonexistent/b.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/a.csv"), "{stderr}");
}

#[test]
fn dimension_mismatch_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0,1\n1,0\n");
    let b = write(dir.path(), "b.csv", "0\n1\n");
    let out = evonas(&["mmd", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(evonas(&[]).status.code(), Some(1));
    assert_eq!(evonas(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(evonas(&["search", "--config", "x.json"]).status.code(), Some(1));
    assert_eq!(evonas(&["mmd", "a", "b", "--kernel", "poly"]).status.code(), Some(1));
    assert_eq!(evonas(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &CONFIG.replace("\"seeds\": [1, 2]", "\"seeds\": []"));
    let out = evonas(&["study", "--config", cfg.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));
}

#[test]
fn search_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CONFIG);
    let cfg = cfg.to_str().unwrap();
    let run = || evonas(&["search", "--config", cfg, "--seed", "7", "--strategy", "ea"]);
    let first = run();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, run().stdout);
    let v = stdout_json(&first);
    assert_eq!(v["strategy"], "ea");
    assert_eq!(v["record"]["evaluated_count"], 30);

    let unknown = evonas(&["search", "--config", cfg, "--seed", "7", "--strategy", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn study_then_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CONFIG);
    let out_dir = dir.path().join("out");
    let out = evonas(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--parallel",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(out_dir.join("trials")).unwrap().count(), 4);
    let summary = fs::read(out_dir.join("summary.json")).unwrap();

    let report = evonas(&["report", "--out", out_dir.to_str().unwrap()]);
    assert!(report.status.success());
    assert_eq!(stdout_json(&report), serde_json::from_slice::<serde_json::Value>(&summary).unwrap());
    assert_eq!(fs::read(out_dir.join("summary.json")).unwrap(), summary);
}

#[test]
fn aps_writes_one_row_per_evolutionary_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", CONFIG);
    let out = evonas(&["aps", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,seed,aps,samples_drawn,final_threshold");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.starts_with("ea,")));

    let out_dir = dir.path().join("aps");
    let out = evonas(&["aps", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("aps.csv")).unwrap(), text);
}
