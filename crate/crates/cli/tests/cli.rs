use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morsebound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8 stdout")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("morsebound-cli-{}-{}", std::process::id(), tag));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn analyze_fixture_passes_and_is_byte_identical() {
    let a = run(&["analyze", "--fixture", "DISK1", "--seed", "7"]);
    let b = run(&["analyze", "--fixture", "DISK1", "--seed", "7"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["input"]["name"], "DISK1");
}

#[test]
fn generated_files_analyze_clean() {
    let dir = scratch("gen");
    let gen = run(&["gen", "disk", "--resolution", "6", "--out-dir", dir.to_str().unwrap()]);
    assert!(gen.status.success(), "{}", stdout(&gen));
    let mesh = dir.join("disk.off");
    let field = dir.join("disk.csv");
    assert!(mesh.exists() && field.exists());
    let a = run(&[
        "analyze",
        "--mesh",
        mesh.to_str().unwrap(),
        "--field",
        field.to_str().unwrap(),
        "--format",
        "text",
    ]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert!(stdout(&a).contains("overall: pass"));
}

#[test]
fn corrupted_field_file_is_a_parse_error() {
    let dir = scratch("badcsv");
    let gen = run(&["gen", "disk", "--resolution", "5", "--out-dir", dir.to_str().unwrap()]);
    assert!(gen.status.success());
    let bad = dir.join("bad.csv");
    fs::write(&bad, "0,not-a-number\n").unwrap();
    let a = run(&[
        "analyze",
        "--mesh",
        dir.join("disk.off").to_str().unwrap(),
        "--field",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(a.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(err["error"]["kind"], "ParseError");
}

#[test]
fn mobius_passes_while_pairing_refuses_it() {
    let a = run(&["analyze", "--fixture", "MOB1"]);
    assert!(a.status.success(), "{}", stdout(&a));
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["duality"]["applicable"], false);
    assert_eq!(report["duality"]["unimodular"], "not-applicable");

    let p = run(&["pairing", "--fixture", "MOB1"]);
    assert_eq!(p.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stdout(&p)).unwrap();
    assert_eq!(err["error"]["kind"], "NotOrientable");
}

#[test]
fn pairing_reports_the_duality_slice() {
    let p = run(&["pairing", "--fixture", "ANN1", "--seed", "3"]);
    assert!(p.status.success(), "{}", stdout(&p));
    let view: serde_json::Value = serde_json::from_str(&stdout(&p)).unwrap();
    assert_eq!(view["pass"], true);
    assert_eq!(view["duality"]["unimodular"], "pass");
    assert_eq!(view["duality"]["geometric"], "pass");
    assert!(view.get("extension").is_none());
}

#[test]
fn suite_with_injected_corruption_reports_exactly_one_failure() {
    let dir = scratch("inject");
    let good = dir.join("good.json");
    let a = run(&[
        "analyze",
        "--fixture",
        "disk",
        "--resolution",
        "8",
        "--no-pairing",
        "--emit-data",
        good.to_str().unwrap(),
        "--out",
        dir.join("report.json").to_str().unwrap(),
    ]);
    assert!(a.status.success(), "{}", stdout(&a));

    let mut data: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&good).unwrap()).unwrap();
    let twist = data["twist"].as_array_mut().unwrap();
    assert!(!twist.is_empty());
    for entry in twist.iter_mut() {
        entry["value"] = serde_json::Value::String("0".to_string());
    }
    let bad = dir.join("corrupt.json");
    fs::write(&bad, serde_json::to_string(&data).unwrap()).unwrap();

    let v = run(&[
        "verify",
        "--no-default-suite",
        "--fixture",
        "DISK1",
        "--fixture",
        "ANN1",
        "--data",
        good.to_str().unwrap(),
        "--data",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(v.status.code(), Some(1));
    let agg: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert_eq!(agg["failures"], 1);
    assert_eq!(agg["pass"], false);
    let entries = agg["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let failed: Vec<&serde_json::Value> =
        entries.iter().filter(|e| e["pass"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["checks"]["hat_matches_absolute"], "fail");
    assert_eq!(failed[0]["checks"]["ses_exact"], "pass");
}

#[test]
fn empty_suite_is_an_empty_aggregate() {
    let v = run(&["verify", "--no-default-suite"]);
    assert!(v.status.success());
    let agg: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert_eq!(agg["entries"].as_array().unwrap().len(), 0);
    assert_eq!(agg["failures"], 0);
    assert_eq!(agg["pass"], true);
}

#[test]
fn bundle_input_analyzes() {
    let dir = scratch("bundle");
    let bundle = dir.join("square.json");
    fs::write(
        &bundle,
        r#"{
            "mesh": {
                "vertices": [[0,0],[1,0],[0,1],[1,1]],
                "triangles": [[0,1,2],[1,3,2]]
            },
            "field": {"values": ["0", "0.25", "1/2", "3"]},
            "orientation": "orientable"
        }"#,
    )
    .unwrap();
    let a = run(&["analyze", "--bundle", bundle.to_str().unwrap(), "--format", "text"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert!(stdout(&a).contains("overall: pass"));
}

#[test]
fn conflicting_inputs_are_rejected() {
    let a = run(&["analyze", "--fixture", "DISK1", "--bundle", "x.json"]);
    assert_eq!(a.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(err["error"]["kind"], "BadParameters");
}
