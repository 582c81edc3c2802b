use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn emotype(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emotype"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = emotype(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_cohort(dir: &Path) {
    ok(
        dir,
        &[
            "synth",
            "--out",
            "cohort.csv",
            "--truth",
            "truth.json",
            "--typologies",
            "3",
            "--subjects-per-typology",
            "5",
            "--windows-per-class",
            "10",
            "--features",
            "4",
            "--class-separation",
            "4",
            "--seed",
            "3",
        ],
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_cohort_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    small_cohort(dir.path());
    let csv = fs::read_to_string(dir.path().join("cohort.csv")).unwrap();
    assert!(csv.starts_with("subject_id,window_id,label,f0,f1,f2,f3\n"));
    assert_eq!(csv.lines().count(), 1 + 15 * 20);
    let truth = read_json(&dir.path().join("truth.json"));
    assert_eq!(truth["typology_of"].as_object().unwrap().len(), 15);
    assert_eq!(truth["run_config"]["subcommand"], "synth");
    assert_eq!(truth["run_config"]["seed"], 3);

    let report = ok(dir.path(), &["validate", "--input", "cohort.csv"]);
    assert!(report.contains("15 subjects, 300 windows, 4 features; 0 excluded"));
}

#[test]
fn cluster_defaults_and_run_config() {
    let dir = tempfile::tempdir().unwrap();
    small_cohort(dir.path());
    ok(dir.path(), &["cluster", "--input", "cohort.csv", "--out", "model.json"]);
    let model = read_json(&dir.path().join("model.json"));
    assert_eq!(model["schema_version"], 1);
    let rc = &model["run_config"];
    assert_eq!(rc["subcommand"], "cluster");
    assert_eq!(rc["clustering"]["k_min"], 2);
    assert_eq!(rc["clustering"]["k_max"], 10);
    assert_eq!(rc["clustering"]["min_frac"], 0.15);
    assert_eq!(rc["clustering"]["ic_min"], 4);
    assert_eq!(rc["clustering"]["ic_max"], 6);
    assert!(rc.get("jobs").is_none());
    assert_eq!(model["typology"]["k"], 3);
}

#[test]
fn assign_dispatches_on_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_cohort(p);
    ok(p, &["cluster", "--input", "cohort.csv", "--out", "model.json"]);

    let csv = fs::read_to_string(p.join("cohort.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    let s000: Vec<&str> = lines.filter(|l| l.starts_with("s000,")).collect();
    let labeled = format!("{header}\n{}\n", s000.join("\n"));
    let hidden: Vec<String> = s000
        .iter()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells[2] = "-1";
            cells.join(",")
        })
        .collect();
    fs::write(p.join("labeled.csv"), labeled).unwrap();
    fs::write(p.join("hidden.csv"), format!("{header}\n{}\n", hidden.join("\n"))).unwrap();

    let m1 = ok(p, &["assign", "--model", "model.json", "--input", "labeled.csv"]);
    assert!(m1.contains("via M1"), "{m1}");
    assert!(m1.contains("centroid distance"));
    let m2 = ok(
        p,
        &[
            "assign",
            "--model",
            "model.json",
            "--input",
            "hidden.csv",
            "--out",
            "assigned.json",
        ],
    );
    assert!(m2.contains("via M2"), "{m2}");
    assert!(m2.contains("summed IC distance"));
    assert_eq!(
        m2.lines()
            .filter(|l| l.starts_with("  TC") && !l.contains("distance"))
            .count(),
        3
    );
    let saved = read_json(&p.join("assigned.json"));
    assert_eq!(saved["assignments"][0]["method"], "M2");
    assert_eq!(saved["assignments"][0]["distances"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_config1_is_repeatable_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_cohort(p);
    let args = [
        "eval-config1",
        "--input",
        "cohort.csv",
        "--out",
        "r1.json",
        "--table",
        "r1.txt",
        "--folds",
        "20",
        "--train-frac",
        "0.7",
        "--seed",
        "7",
    ];
    let table = ok(p, &args);
    let first = fs::read(p.join("r1.json")).unwrap();
    ok(p, &args);
    assert_eq!(fs::read(p.join("r1.json")).unwrap(), first);
    assert!(table.contains("Config 1: 20 subject-level 70/30 splits"));
    assert_eq!(fs::read_to_string(p.join("r1.txt")).unwrap(), table);

    let report = read_json(&p.join("r1.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["run_config"]["subcommand"], "eval-config1");
    assert_eq!(report["run_config"]["folds"], 20);
    assert_eq!(report["pipeline"]["knn_grid"]["costs"][0], 1.6);

    let rendered = ok(p, &["report", "--input", "r1.json"]);
    assert_eq!(rendered, table);
    let json = ok(p, &["report", "--input", "r1.json", "--style", "json"]);
    assert_eq!(json.as_bytes(), first.as_slice());
}

#[test]
fn eval_config2_reports_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    small_cohort(p);
    let table = ok(
        p,
        &[
            "eval-config2",
            "--input",
            "cohort.csv",
            "--out",
            "r2.json",
            "--knn-k-max",
            "9",
        ],
    );
    assert!(table.contains("leave-one-subject-out over 15 subjects"));
    assert!(table.contains("per subject"));
    let report = read_json(&p.join("r2.json"));
    assert_eq!(report["folds"].as_array().unwrap().len(), 15);
    assert_eq!(report["pipeline"]["knn_grid"]["k_values"].as_array().unwrap().len(), 5);
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["cluster", "--input", "x.csv"][..],
        &["synth", "--seed", "minus-one"][..],
    ] {
        let out = emotype(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn module_errors_exit_with_1_and_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = emotype(p, &["validate", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IoError"));

    fs::write(p.join("bad.csv"), "subject,window_id,label,f0\na,0,1,0.5\n").unwrap();
    let out = emotype(p, &["validate", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MissingColumn"));

    fs::write(p.join("unlabeled.csv"), "subject_id,window_id,label,f0\na,0,-1,0.5\n").unwrap();
    let out = emotype(p, &["cluster", "--input", "unlabeled.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnlabeledInTraining"));
    assert!(!p.join("m.json").exists());

    small_cohort(p);
    let out = emotype(
        p,
        &[
            "cluster",
            "--input",
            "cohort.csv",
            "--out",
            "m.json",
            "--k-min",
            "5",
            "--k-max",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InvalidConfig"));
}
