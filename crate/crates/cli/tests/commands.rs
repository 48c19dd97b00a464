use std::process::Command;

fn vismanip(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vismanip"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn sample_spec_and_translate() {
    let (ok, out, _) = vismanip(&["sample-spec", "fruit"]);
    assert!(ok);
    let spec: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(spec["mark"], "bar");

    let (ok, out, _) = vismanip(&["translate", "Which fruit has the lowest price?", "--spec", "fruit"]);
    assert!(ok);
    let rep: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rep["raw"], "(identify fruit; filter: price = min(price))");
    assert_eq!(rep["backend"], "rules");

    let (ok, _, err) = vismanip(&["translate", "hello there", "--spec", "fruit"]);
    assert!(!ok);
    assert!(err.contains("unparseable"), "{err}");
}

#[test]
fn plan_from_task_text() {
    let (ok, out, _) = vismanip(&[
        "plan",
        "--spec",
        "energy",
        "--task",
        "(trend consumption; filter: energy = {coal, oil, gas}; derive: trend(consumption))",
    ]);
    assert!(ok);
    let steps: Vec<serde_json::Value> = serde_json::from_str(&out).unwrap();
    assert!(!steps.is_empty());
}

#[test]
fn generate_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let (ok, out, err) = vismanip(&[
        "gen-dataset",
        "--out",
        data.to_str().unwrap(),
        "--total",
        "120",
        "--seed",
        "9",
    ]);
    assert!(ok, "{err}");
    let stats: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["total"], 120);
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 120);

    let report = dir.path().join("r.json");
    let (ok, _, err) = vismanip(&[
        "evaluate",
        "--dataset",
        data.to_str().unwrap(),
        "--report",
        "json",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["overall"]["n"], 120);
    assert_eq!(r["overall"]["literal"], 1.0);

    let (ok, _, err) = vismanip(&["evaluate", "--dataset", data.to_str().unwrap(), "--backend", "remote"]);
    assert!(!ok);
    assert!(err.contains("VISMANIP_LLM_ENDPOINT"), "{err}");
}

#[test]
fn render_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, out, err) = vismanip(&[
        "render",
        "What is the sum of consumption of solar and wind?",
        "--spec",
        "energy",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert!(out.contains("keyframes"));
    assert!(dir.path().join("frame-00.svg").exists());
    assert!(dir.path().join("plan.json").exists());
}
