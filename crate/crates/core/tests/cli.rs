use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn datalens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datalens"))
        .current_dir(dir)
        .env_remove("DATALENS_SIGNATURES")
        .env_remove("DATALENS_RULES")
        .env("DATALENS_RATINGS", dir.join("ratings.json"))
        .args(args)
        .output()
        .expect("run datalens")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = datalens(dir, args);
    assert!(
        out.status.success(),
        "datalens {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    datalens(dir, args).status.code().unwrap()
}

fn fixture(dir: &Path, args: &[&str]) {
    let mut full = vec!["fixture", "-o", "."];
    full.extend_from_slice(args);
    ok(dir, &full);
}

fn ingest(dir: &Path, zips: &[&str]) -> Vec<PathBuf> {
    let mut args = vec!["ingest", "-o", "."];
    args.extend_from_slice(zips);
    ok(dir, &args);
    zips.iter()
        .map(|z| dir.join(format!("{}.unified.json", z.trim_end_matches(".zip"))))
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(dir.path(), &["--help"]).contains("ingest"));
    assert!(ok(dir.path(), &["--version"]).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["frobnicate"]), 1);
    assert_eq!(code(dir.path(), &["stats"]), 1);
    assert_eq!(code(dir.path(), &["stats", "missing.json"]), 1);
    assert_eq!(code(dir.path(), &["fixture", "--service", "myspace"]), 1);
    assert_eq!(code(dir.path(), &["fixture", "--preset", "use-case-9"]), 1);
}

#[test]
fn ingest_two_services_and_report_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "facebook", "--seed", "1", "--name", "fb"]);
    fixture(d, &["--service", "google", "--seed", "2", "--name", "gg"]);
    let docs = ingest(d, &["fb.zip", "gg.zip"]);
    assert!(docs.iter().all(|p| p.exists()));

    let manifest = |name: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(d.join(format!("{name}.manifest.json"))).unwrap()).unwrap()
    };
    let expected: u64 = ["fb", "gg"]
        .iter()
        .flat_map(|n| {
            manifest(n)["expected_counts"]
                .as_object()
                .unwrap()
                .values()
                .map(|v| v.as_u64().unwrap())
                .collect::<Vec<_>>()
        })
        .sum();

    let docs: Vec<&str> = docs.iter().map(|p| p.to_str().unwrap()).collect();
    let mut args = vec!["stats", "--format", "json"];
    args.extend(&docs);
    let stats: Value = serde_json::from_str(&ok(d, &args)).unwrap();
    assert_eq!(stats["total_elements"].as_u64().unwrap(), expected);
    let services = stats["per_service"].as_object().unwrap();
    assert!(services.contains_key("facebook") && services.contains_key("google"));

    let mut args = vec!["stats"];
    args.extend(&docs);
    let table = ok(d, &args);
    assert!(table.contains("Messages"));
}

#[test]
fn detect_prints_service_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "twitter", "--seed", "3", "--name", "tw"]);
    assert_eq!(ok(d, &["detect", "tw.zip"]).trim(), "twitter");
    std::fs::write(d.join("junk.zip"), b"PK but not really").unwrap();
    assert_eq!(code(d, &["detect", "junk.zip"]), 1);
    assert_eq!(code(d, &["ingest", "junk.zip"]), 1);
    let listed: Value = serde_json::from_str(&ok(d, &["list", "--format", "json", "tw.zip"])).unwrap();
    assert!(!listed.as_array().unwrap().is_empty());
}

#[test]
fn service_override_and_dataset_id() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "instagram", "--seed", "4", "--name", "ig"]);
    let out = ok(
        d,
        &["ingest", "--service", "instagram", "--dataset-id", "insta", "ig.zip"],
    );
    assert!(out.contains("(forced)"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(d.join("ig.unified.json")).unwrap()).unwrap();
    assert_eq!(doc["dataset_id"], "insta");
    assert_eq!(code(d, &["ingest", "--service", "myspace", "ig.zip"]), 1);
}

#[test]
fn ingest_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "google", "--seed", "8", "--name", "g"]);
    ingest(d, &["g.zip"]);
    let first = std::fs::read(d.join("g.unified.json")).unwrap();
    ingest(d, &["g.zip"]);
    assert_eq!(first, std::fs::read(d.join("g.unified.json")).unwrap());
}

#[test]
fn treemap_svg_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--preset", "use-case-1"]);
    ingest(d, &["uc1-bob-facebook.zip"]);
    let a = ok(d, &["treemap", "uc1-bob-facebook.unified.json"]);
    let b = ok(d, &["treemap", "uc1-bob-facebook.unified.json"]);
    assert_eq!(a, b);
    assert!(a.starts_with("<svg"));
    ok(
        d,
        &[
            "treemap",
            "--format",
            "json",
            "-o",
            "t.json",
            "uc1-bob-facebook.unified.json",
        ],
    );
    let geometry: Value = serde_json::from_str(&std::fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    let first = &geometry["rects"][0];
    assert_eq!(first["name"], "message_1.json");
    assert_eq!(first["color"], "#e7298a");
}

#[test]
fn timeline_split_has_panel_per_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--preset", "use-case-2"]);
    let zips = [
        "uc2-alice-facebook.zip",
        "uc2-alice-google.zip",
        "uc2-bob-facebook.zip",
        "uc2-bob-google.zip",
    ];
    let docs = ingest(d, &zips);
    let docs: Vec<&str> = docs.iter().map(|p| p.to_str().unwrap()).collect();
    let mut args = vec!["timeline", "--split-by-dataset"];
    args.extend(&docs);
    let svg = ok(d, &args);
    assert_eq!(svg.matches("class=\"panel\"").count(), 4);

    let mut args = vec!["timeline", "--format", "json", "--category", "Location"];
    args.extend(&docs);
    let geometry: Value = serde_json::from_str(&ok(d, &args)).unwrap();
    let points = geometry["panels"][0]["points"].as_array().unwrap();
    assert!(!points.is_empty());
    assert!(points.iter().all(|p| p["category"] == "Location"));

    let mut args = vec!["timeline", "--from", "2020-01-01", "--to", "2019-01-01"];
    args.extend(&docs);
    assert_eq!(code(d, &args), 1);
}

#[test]
fn rate_then_average() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "facebook", "--seed", "5", "--name", "fb"]);
    ingest(d, &["fb.zip"]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(d.join("fb.unified.json")).unwrap()).unwrap();
    let ids: Vec<&str> = doc["elements"].as_array().unwrap()[..2]
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    ok(
        d,
        &[
            "rate",
            "fb.unified.json",
            "--element",
            ids[0],
            "--value",
            "0.25",
            "--at",
            "2024-01-01T00:00:00Z",
        ],
    );
    ok(
        d,
        &[
            "rate",
            "fb.unified.json",
            "--element",
            ids[1],
            "--value",
            "0.75",
            "--at",
            "2024-01-01T00:00:00Z",
        ],
    );
    let out = ok(d, &["average", "fb.unified.json"]);
    assert!(out.starts_with("0.500000 (2 of "), "{out}");
    assert!(d.join("ratings.json").exists());

    assert_eq!(
        code(d, &["rate", "fb.unified.json", "--element", ids[0], "--value", "1.5"]),
        1
    );
    assert_eq!(
        code(d, &["rate", "fb.unified.json", "--element", "nope", "--value", "0.5"]),
        1
    );
    let out = ok(
        d,
        &[
            "average",
            "fb.unified.json",
            "--category",
            "Search",
            "-q",
            "zzzz-no-match",
        ],
    );
    assert!(out.starts_with("none (0 of 0"), "{out}");
}

#[test]
fn degenerate_treemap_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, &["--service", "facebook", "--seed", "6", "--name", "fb"]);
    ingest(d, &["fb.zip"]);
    assert_eq!(code(d, &["treemap", "--width", "0", "fb.unified.json"]), 1);
    assert_eq!(code(d, &["treemap", "--dataset", "nobody", "fb.unified.json"]), 1);
}
