use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epitome(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epitome"))
        .args(args)
        .current_dir(dir)
        .env_remove("EPITOME_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A nine-stroke airplane: fuselage, wings, tail and details.
fn write_airplane_fixture(dir: &Path) {
    let strokes: Vec<Vec<[f64; 2]>> = vec![
        vec![[100.0, 400.0], [700.0, 400.0]],
        vec![[350.0, 400.0], [250.0, 150.0]],
        vec![[350.0, 400.0], [250.0, 650.0]],
        vec![[650.0, 400.0], [720.0, 300.0]],
        vec![[650.0, 400.0], [720.0, 500.0]],
        vec![[120.0, 380.0], [160.0, 380.0]],
        vec![[200.0, 380.0], [240.0, 380.0]],
        vec![[280.0, 380.0], [320.0, 380.0]],
        vec![[100.0, 400.0], [80.0, 420.0]],
    ];
    let doc = serde_json::json!({"id": "plane9", "category": "airplane", "extent": [800.0, 800.0], "strokes": strokes});
    fs::create_dir_all(dir.join("data/airplane")).unwrap();
    fs::write(dir.join("data/airplane/plane9.json"), doc.to_string()).unwrap();
    fs::write(dir.join("stub.json"), r#"{"plane9": [0, 1, 0, 1, 1, 1, 1, 1, 1]}"#).unwrap();
}

#[test]
fn stubbed_airplane_example() {
    let tmp = tempfile::tempdir().unwrap();
    write_airplane_fixture(tmp.path());
    let o = epitome(
        &["epitome", "--data", "data", "--stub-labels", "stub.json", "--out", "r.ndjson", "--dump-canvases"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("r.ndjson")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(rec["e"], 4);
    assert_eq!(rec["N"], 9);
    assert_eq!(rec["labels"], serde_json::json!([0, 1, 0, 1, 1, 1, 1, 1, 1]));
    assert!((rec["score"].as_f64().unwrap() - 4.0 / 9.0).abs() < 1e-12);
    assert_eq!(rec["epitomizable"], true);
    let pgm = fs::read(tmp.path().join("r.ndjson.canvases/plane9_S4.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n256 256\n255\n"));
    assert!(tmp.path().join("r.ndjson.config.json").exists());

    // The same results feed the analysis.
    let o = epitome(&["analyze", "--results", "r.ndjson", "--out", "rep"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("rep/category_stats.csv")).unwrap();
    assert_eq!(
        csv,
        "category,n,median,stderr,bar_low,bar_high\nairplane,1,0.4444444444444444,0,0.4444444444444444,0.4444444444444444\n"
    );
    for f in ["exceedance.csv", "fig3.svg", "fig4.svg", "headline.json", "config.json"] {
        assert!(tmp.path().join("rep").join(f).exists(), "{f}");
    }
}

#[test]
fn stub_labels_must_match_stroke_count() {
    let tmp = tempfile::tempdir().unwrap();
    write_airplane_fixture(tmp.path());
    fs::write(tmp.path().join("stub.json"), r#"{"plane9": [1, 1]}"#).unwrap();
    let o = epitome(&["epitome", "--data", "data", "--stub-labels", "stub.json", "--out", "r.ndjson"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("9 strokes but 2 stub labels"));
    assert_eq!(stderr(&o).trim().lines().count(), 1);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = epitome(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(epitome(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn analyze_empty_results() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("empty.ndjson"), "").unwrap();
    let o = epitome(&["analyze", "--results", "empty.ndjson", "--out", "rep"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no epitomizable results"));
}

#[test]
fn analyze_rejects_inconsistent_records() {
    let tmp = tempfile::tempdir().unwrap();
    let line = r#"{"id":"a","category":"cup","N":3,"labels":[0,1,1],"e":1,"score":0.0,"epitomizable":true}"#;
    fs::write(tmp.path().join("bad.ndjson"), format!("{line}\n")).unwrap();
    let o = epitome(&["analyze", "--results", "bad.ndjson", "--out", "rep"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.ndjson:1"));
}

#[test]
fn bad_thread_count_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_epitome"))
        .arg("selftest")
        .env("EPITOME_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    fs::write(tmp.path().join("cfg.json"), r#"{"side": 0}"#).unwrap();
    let o = epitome(&["synth", "--out", "data", "--per-category", "3"], tmp.path());
    assert!(o.status.success());
    let o = epitome(&["train", "--data", "data", "--config", "cfg.json", "--out", "m.epit"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid config"));
}

#[test]
fn convert_svg_to_json() {
    let tmp = tempfile::tempdir().unwrap();
    let svg = r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800">
      <g><path d="M 10 10 L 100 100"/><path d="M100,10 C 120,40 140,40 160,10"/></g></svg>"#;
    fs::create_dir_all(tmp.path().join("svg/cup")).unwrap();
    fs::write(tmp.path().join("svg/cup/42.svg"), svg).unwrap();
    let o = epitome(&["convert", "--in", "svg", "--out", "json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("json/cup/42.json")).unwrap()).unwrap();
    assert_eq!(doc["id"], "42");
    assert_eq!(doc["category"], "cup");
    assert_eq!(doc["strokes"].as_array().unwrap().len(), 2);
}

#[test]
fn train_eval_epitome_round() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = r#"{"side": 64, "features": {"descriptor": {"grid": 8, "patch": 16}, "pca_dim": 8,
        "components": 4, "fit_samples": 2000}, "train": {"folds": 2}}"#;
    fs::write(dir.join("cfg.json"), cfg).unwrap();
    assert!(epitome(&["synth", "--out", "data", "--per-category", "6"], dir).status.success());
    let o = epitome(&["train", "--data", "data", "--config", "cfg.json", "--out", "m.epit", "--no-augment"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("test accuracy"));
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("m.epit.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["augment"], false);
    assert_eq!(echoed["side"], 64);

    let o = epitome(&["eval", "--model", "m.epit", "--data", "data", "--subset", "test"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["report"]["total"], 5);

    let run = |out: &str| {
        let o = epitome(&["epitome", "--model", "m.epit", "--data", "data", "--subset", "test", "--out", out], dir);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(dir.join(out)).unwrap()
    };
    let first = run("a.ndjson");
    assert_eq!(first, run("b.ndjson"));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 5);

    let o = epitome(&["augment", "--data", "data", "--out", "aug", "--config", "cfg.json"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("aug/star/star-000/29.pgm").exists());
    assert!(dir.join("aug/battery.json").exists());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = epitome(&["selftest"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.matches("PASS").count(), 3);
}
