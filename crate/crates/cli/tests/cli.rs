use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ARTIFACTS: [&str; 11] = [
    "summary.json",
    "pareto.csv",
    "spectrum.csv",
    "decomposition.csv",
    "heatmap.csv",
    "features.csv",
    "clusters.csv",
    "loadings.json",
    "sankey.json",
    "treemap.json",
    "sector_stats.json",
];

fn audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audit"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn audit")
}

fn ok(args: &[&str]) -> String {
    let out = audit(args);
    assert!(
        out.status.success(),
        "audit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, services: &str, days: &str) -> PathBuf {
    ok(&[
        "synth",
        dir.to_str().unwrap(),
        "--services",
        services,
        "--days",
        days,
    ]);
    dir.join("audit.conf")
}

fn full_run(conf: &Path, out: &Path) {
    let (c, o) = (conf.to_str().unwrap(), out.to_str().unwrap());
    for stage in ["ingest", "classify", "analyze", "report"] {
        ok(&["--config", c, "--out", o, stage]);
    }
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), "16", "60");
    let out = dir.path().join("out");
    full_run(&conf, &out);
    for name in ARTIFACTS
        .iter()
        .chain(&["report.md", "corpus.jsonl", "classifications.jsonl"])
    {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["messages"].as_u64().unwrap() > 0);
    assert_eq!(summary["services"], 16);
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.starts_with('#'));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), "12", "45");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    full_run(&conf, &a);
    full_run(&conf, &b);
    for name in ARTIFACTS {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}

#[test]
fn small_corpus_reports_clamped_k_range() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), "6", "40");
    let (c, o) = (conf.to_str().unwrap(), dir.path().join("out"));
    let o = o.to_str().unwrap();
    ok(&["--config", c, "--out", o, "ingest"]);
    ok(&["--config", c, "--out", o, "classify"]);
    let stdout = ok(&["--config", c, "--out", o, "analyze"]);
    assert!(
        stdout.contains("warning:") && stdout.contains("k range"),
        "{stdout}"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(Path::new(o).join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["clustering"]["k_range_clamped"], true);
}

#[test]
fn fixture_check_prints_one_line_per_check() {
    let stdout = ok(&["fixture-check"]);
    let lines: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .collect();
    assert_eq!(lines.len(), 5, "{stdout}");
    assert!(stdout.contains("PASS chi-squared"));
    assert!(stdout.contains("PASS anova"));
    // the bundled table sums to 4842, five short of the published total
    assert!(stdout.contains("FAIL total volume"));
}

#[test]
fn fixture_check_strict_fails_on_mismatch() {
    let out = audit(&["fixture-check", "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    let out = audit(&["fixture-check", "--clusters"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("k=2 membership"));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.conf");
    let out = audit(&["--config", missing.to_str().unwrap(), "analyze"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(
        audit(&["--config", bad.to_str().unwrap(), "ingest"])
            .status
            .code(),
        Some(2)
    );

    // analyze before ingest: the corpus file is missing
    let empty = dir.path().join("empty");
    let out = audit(&["--out", empty.to_str().unwrap(), "analyze"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run ingest first"));

    let table = dir.path().join("table.csv");
    fs::write(&table, "root_domain,sector\nx.com\n").unwrap();
    assert_eq!(
        audit(&["fixture-check", "--table", table.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn irr_reports_pairwise_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.csv");
    fs::write(
        &path,
        "item,alice,bob,model\n1,promotional,promotional,promotional\n2,crm,crm,alert\n3,alert,alert,alert\n4,crm,promotional,crm\n",
    )
    .unwrap();
    let stdout = ok(&["irr", path.to_str().unwrap(), "--machine", "model"]);
    assert!(stdout.contains("alice vs bob: kappa"), "{stdout}");
    assert!(stdout.contains("mean machine/human kappa"));
}
