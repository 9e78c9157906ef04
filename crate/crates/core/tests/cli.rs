use std::path::Path;
use std::process::{Command, Output};

fn treespan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treespan"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

const CONFIG: &str = r#"{
  "node_counts": [30],
  "reps": 2,
  "rounds": 100,
  "area": { "width": 550, "height": 550 }
}"#;

#[test]
fn run_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), CONFIG).unwrap();
    let base = treespan(
        &[
            "run",
            "--config",
            "c.json",
            "--optimizer",
            "none",
            "--thresholds",
            "off",
            "--out",
            "base",
        ],
        tmp.path(),
    );
    assert!(
        base.status.success(),
        "{}",
        String::from_utf8_lossy(&base.stderr)
    );
    let prop = treespan(
        &["run", "--config", "c.json", "--out", "prop", "--jobs", "2"],
        tmp.path(),
    );
    assert!(prop.status.success());
    assert!(tmp.path().join("base/trace_none-off_n30.csv").exists());
    assert!(tmp.path().join("prop/trace_vns-on_n30.csv").exists());

    let cmp = treespan(
        &["compare", "base/summary.json", "prop/summary.json"],
        tmp.path(),
    );
    assert!(
        cmp.status.success(),
        "{}",
        String::from_utf8_lossy(&cmp.stderr)
    );
    let text = String::from_utf8(cmp.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("reference,policy,node_count,pairs,dead_delta"));
    assert!(lines[1].starts_with("none-off,vns-on,30,2,"));

    let same = treespan(
        &["compare", "base/summary.json", "base/summary.json"],
        tmp.path(),
    );
    let text = String::from_utf8(same.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    // every delta is zero and every pair a tie
    for m in 0..4 {
        let at = 4 + 4 * m;
        assert_eq!(row[at].parse::<f64>().unwrap(), 0.0);
        assert_eq!(&row[at + 1..at + 4], ["0", "0", "2"]);
    }
}

#[test]
fn compare_rejects_mismatched_node_counts() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), CONFIG).unwrap();
    std::fs::write(
        tmp.path().join("d.json"),
        CONFIG.replace("[30]", "[30, 35]"),
    )
    .unwrap();
    assert!(
        treespan(&["run", "--config", "c.json", "--out", "a"], tmp.path())
            .status
            .success()
    );
    assert!(
        treespan(&["run", "--config", "d.json", "--out", "b"], tmp.path())
            .status
            .success()
    );
    let out = treespan(&["compare", "a/summary.json", "b/summary.json"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("35"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = treespan(&["run", "--config", "missing.json"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));

    std::fs::write(
        tmp.path().join("bad.json"),
        r#"{ "node_counts": [100], "reps": 0 }"#,
    )
    .unwrap();
    let bad = treespan(&["run", "--config", "bad.json"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("reps"));

    std::fs::write(
        tmp.path().join("sparse.json"),
        r#"{ "node_counts": [20], "reps": 1, "rounds": 5, "comm_radius": 1, "anchor_radius": 1 }"#,
    )
    .unwrap();
    let runtime = treespan(
        &["run", "--config", "sparse.json", "--out", "x"],
        tmp.path(),
    );
    assert_eq!(runtime.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&runtime.stderr).contains("seed=1"));

    let usage = treespan(&["run"], tmp.path());
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn oracle_solves_small_instance() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("inst.json"),
        r#"{
  "nodes": [[500, 460], [600, 470], [520, 360], [610, 370], [560, 280]],
  "energies": [0.05, 0.2, 0.2, 0.1, 0.2],
  "anchor_radius": 60
}"#,
    )
    .unwrap();
    let out = treespan(&["oracle", "--nodes", "inst.json"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let opt = report["optimum_cost"].as_f64().unwrap();
    let greedy = report["greedy_cost"].as_f64().unwrap();
    assert!(opt <= greedy);
    let parents = report["parents"].as_array().unwrap();
    assert_eq!(parents.len(), 5);
    assert_eq!(parents[0], "sink");
    assert_eq!(parents[1], "sink");

    let big: Vec<String> = (0..10).map(|i| format!("[{}, 480]", 100 * i)).collect();
    std::fs::write(
        tmp.path().join("big.json"),
        format!(r#"{{ "nodes": [{}] }}"#, big.join(",")),
    )
    .unwrap();
    let out = treespan(&["oracle", "--nodes", "big.json"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}
