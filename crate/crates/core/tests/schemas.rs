use std::fs;
use std::path::{Path, PathBuf};

use inboxaudit_core::report::{
    run_analyze, run_classify, run_ingest, AuditConfig, ANALYSIS_ARTIFACTS,
};
use inboxaudit_core::synth::{generate, SynthSpec};
use serde_json::{Map, Value};

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn check(schema_file: &str, instance: &Value) {
    let text = fs::read_to_string(schema_dir().join(schema_file)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema)
        .unwrap_or_else(|e| panic!("{schema_file} does not compile: {e}"));
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{schema_file}:\n{}", errors.join("\n"));
}

/// Rows as objects; numeric cells become numbers, empty cells null.
fn csv_rows(path: &Path) -> Value {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            let mut obj = Map::new();
            for (k, v) in header.iter().zip(r.iter()) {
                let cell = if v.is_empty() {
                    Value::Null
                } else if let Ok(i) = v.parse::<i64>() {
                    Value::from(i)
                } else if let Some(x) = v.parse::<f64>().ok().and_then(serde_json::Number::from_f64)
                {
                    Value::Number(x)
                } else {
                    Value::String(v.to_string())
                };
                obj.insert(k.to_string(), cell);
            }
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

fn run_pipeline(services: usize, days: u32) -> (tempfile::TempDir, AuditConfig) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthSpec {
        services,
        days,
        ..SynthSpec::default()
    })
    .unwrap();
    let conf = corpus.write(dir.path()).unwrap();
    let cfg = AuditConfig::load(conf).unwrap();
    run_ingest(&cfg).unwrap();
    run_classify(&cfg, None).unwrap();
    run_analyze(&cfg).unwrap();
    (dir, cfg)
}

fn validate_all(out: &Path) {
    for name in [
        "summary.json",
        "ingest_report.json",
        "classification_summary.json",
    ]
    .into_iter()
    .chain(ANALYSIS_ARTIFACTS)
    {
        let path = out.join(name);
        let (schema, instance) = match name.strip_suffix(".json") {
            Some(stem) => (
                format!("{stem}.schema.json"),
                serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap(),
            ),
            None => (format!("{name}.schema.json"), csv_rows(&path)),
        };
        check(&schema, &instance);
    }
}

#[test]
fn full_corpus_artifacts_match_schemas() {
    let (_dir, cfg) = run_pipeline(24, 90);
    validate_all(&cfg.output_dir);
}

#[test]
fn degenerate_corpus_artifacts_match_schemas() {
    // Two services over a short window: clustering and the sector tests fail
    // and their sections are written empty.
    let (_dir, cfg) = run_pipeline(2, 10);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join("summary.json")).unwrap())
            .unwrap();
    assert!(!summary["warnings"].as_array().unwrap().is_empty());
    validate_all(&cfg.output_dir);
}

#[test]
fn schemas_reject_malformed_documents() {
    let text = fs::read_to_string(schema_dir().join("sankey.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    assert!(v.is_valid(&serde_json::json!([{"source": "a", "target": "b", "weight": 3}])));
    assert!(!v.is_valid(&serde_json::json!([{"source": "a", "target": "b", "weight": -1}])));
    assert!(!v.is_valid(&serde_json::json!([{"source": "a", "weight": 1}])));
}
