use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qitags(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qitags"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run qitags")
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances/two_by_two.json")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn one_task_instance(budget: f64) -> String {
    format!(
        r#"{{
  "robots": [{{ "traits": [1.0], "start": [0, 0], "speed": 1.0 }}],
  "tasks": [{{
    "duration": 2.0, "start_site": [3, 0], "end_site": [3, 0],
    "quality_map": {{ "type": "linear", "weights": [1.0], "normalizer": 1.0 }}
  }}],
  "map": ["....", "...."],
  "time_budget": {budget}
}}"#
    )
}

#[test]
fn trivial_instance_makespan_is_travel_plus_duration() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.json"), one_task_instance(10.0)).unwrap();
    let out = qitags(dir.path(), &["solve", "one.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = read_json(&dir.path().join("solution.json"));
    assert_eq!(sol["status"], "solution");
    assert_eq!(sol["makespan"].as_f64().unwrap(), 3.0 + 2.0);
    assert_eq!(sol["motion_plans"][0]["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn tiny_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.json"), one_task_instance(0.001)).unwrap();
    let out = qitags(dir.path(), &["solve", "one.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_json(&dir.path().join("solution.json"))["status"], "infeasible");
    let out = qitags(dir.path(), &["oracle", "one.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn alpha_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = qitags(dir.path(), &["solve", sample().to_str().unwrap(), "--alpha", "0.7", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0));
    let sol = read_json(&dir.path().join("s.json"));
    assert_eq!(sol["metadata"]["alpha"].as_f64(), Some(0.7));
    assert_eq!(sol["bound_report"]["alpha"].as_f64(), Some(0.7));
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"robots\": [,\n}").unwrap();
    let out = qitags(dir.path(), &["solve", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 14"), "{err}");
}

#[test]
fn unknown_field_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = one_task_instance(10.0).replace("\"time_budget\"", "\"budget\": 3, \"time_budget\"");
    std::fs::write(dir.path().join("x.json"), text).unwrap();
    assert_eq!(qitags(dir.path(), &["solve", "x.json"]).status.code(), Some(1));
}

#[test]
fn missing_file_and_bad_usage_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qitags(dir.path(), &["solve", "nope.json"]).status.code(), Some(1));
    assert_eq!(qitags(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(qitags(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_agrees_with_solve_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample();
    assert_eq!(qitags(dir.path(), &["solve", s.to_str().unwrap(), "--oracle"]).status.code(), Some(0));
    assert_eq!(qitags(dir.path(), &["oracle", s.to_str().unwrap()]).status.code(), Some(0));
    let sol = read_json(&dir.path().join("solution.json"));
    let ora = read_json(&dir.path().join("oracle.json"));
    assert_eq!(ora["status"], "optimal");
    assert_eq!(ora["quality"].as_f64(), Some(1.2));
    assert_eq!(ora["allocation"], serde_json::json!([[1, 0], [0, 1]]));
    let report = &sol["bound_report"];
    assert_eq!(report["q_optimal"], ora["quality"]);
    assert_eq!(report["q_root"], ora["q_root"]);
    assert_eq!(report["q_null"], ora["q_null"]);
}

#[test]
fn oracle_refuses_oversize_instances() {
    let dir = tempfile::tempdir().unwrap();
    let robots = [r#"{ "traits": [1.0], "start": [0, 0], "speed": 1.0 }"#; 7].join(",");
    let task = r#"{ "duration": 1.0, "start_site": [1, 0], "end_site": [1, 0], "quality_map": { "type": "linear", "weights": [1.0], "normalizer": 7.0 } }"#;
    let tasks = [task; 3].join(",");
    let text = format!(r#"{{ "robots": [{robots}], "tasks": [{tasks}], "map": [".."], "time_budget": 100 }}"#);
    std::fs::write(dir.path().join("big.json"), text).unwrap();
    let out = qitags(dir.path(), &["oracle", "big.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("oracle.json").exists());
}

#[test]
fn sweep_writes_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample();
    assert_eq!(qitags(dir.path(), &["sweep", s.to_str().unwrap()]).status.code(), Some(0));
    let first = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "alpha,quality,makespan,norm_gap,norm_apriori_bound,norm_posthoc_bound,holds_apriori,holds_posthoc");
    assert_eq!(lines.len(), 12);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0].parse::<f64>().unwrap() < 0.5 {
            assert_eq!(cols[6], "true", "{line}");
        }
    }
    assert_eq!(qitags(dir.path(), &["--sequential", "sweep", s.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), first);
}

#[test]
fn sweep_accepts_alpha_list() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample();
    assert_eq!(qitags(dir.path(), &["sweep", s.to_str().unwrap(), "--alphas", "0,0.25,1"]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn learn_uniform_emits_one_trace_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["learn", "--synthetic", "1", "--budget", "8", "--seeds", "20", "--strategy", "uniform"];
    assert_eq!(qitags(dir.path(), &args).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("learning_curve.csv")).unwrap();
    let mut rdr = csv_rows(&text);
    assert_eq!(rdr.remove(0), ["strategy", "seed", "step", "rmse", "envelope_min", "envelope_mean", "envelope_max"]);
    assert_eq!(rdr.len(), 20 * 8);
    let seeds: std::collections::BTreeSet<&str> = rdr.iter().map(|r| r[1]).collect();
    assert_eq!(seeds.len(), 20);
    assert!(rdr.iter().all(|r| r[0] == "uniform" && !r[5].is_empty()));
}

#[test]
fn learn_entropy_ignores_seed_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seeds: &str| {
        let args = ["learn", "--synthetic", "0", "--budget", "6", "--seeds", seeds, "--strategy", "entropy"];
        assert_eq!(qitags(dir.path(), &args).status.code(), Some(0));
        std::fs::read_to_string(dir.path().join("learning_curve.csv")).unwrap()
    };
    assert_eq!(run("3"), run("11"));
}

#[test]
fn learn_budget_larger_than_pool_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "a,b,label\n0.1,0.2,0.3\n0.4,0.5,0.6\n0.7,0.8,0.9\n").unwrap();
    let out = qitags(dir.path(), &["learn", "d.csv", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn learned_model_plugs_into_an_instance() {
    let dir = tempfile::tempdir().unwrap();
    let csv: String = std::iter::once("a,b,label\n".to_string())
        .chain((0..30).map(|i| {
            let (a, b) = ((i % 6) as f64 / 5.0, (i / 6) as f64 / 4.0);
            format!("{a},{b},{}\n", (a + b) / 2.0)
        }))
        .collect();
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    let args = ["learn", "d.csv", "--budget", "12", "--strategy", "entropy", "--model-out", "gp.json"];
    assert_eq!(qitags(dir.path(), &args).status.code(), Some(0));
    let text = r#"{
  "robots": [
    { "traits": [0.5, 0.5], "start": [0, 0], "speed": 1.0 },
    { "traits": [0.4, 0.2], "start": [1, 0], "speed": 1.0 }
  ],
  "tasks": [{ "duration": 1.0, "start_site": [2, 0], "end_site": [2, 0], "quality_map": { "type": "learned", "model_path": "gp.json" } }],
  "map": ["..."],
  "time_budget": 50
}"#;
    std::fs::write(dir.path().join("inst.json"), text).unwrap();
    assert_eq!(qitags(dir.path(), &["solve", "inst.json"]).status.code(), Some(0));
    let q = read_json(&dir.path().join("solution.json"))["total_quality"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&q));
}

#[test]
fn generated_instances_round_trip_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qitags(dir.path(), &["generate", "--seed", "4"]).status.code(), Some(0));
    assert_eq!(qitags(dir.path(), &["solve", "instance.json"]).status.code(), Some(0));
    assert_eq!(qitags(dir.path(), &["generate", "--seed", "4", "--infeasible", "--out", "bad.json"]).status.code(), Some(0));
    assert_eq!(qitags(dir.path(), &["solve", "bad.json"]).status.code(), Some(2));
}

fn csv_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines().map(|l| l.split(',').collect()).collect()
}
