//! The shipped JSON Schemas accept what the crate writes and reject what
//! the reader rejects.

use std::path::{Path, PathBuf};

use annobench::adapter::{parse_metrics, AdapterHyperparameters, AdapterJob, JOB_SCHEMA_VERSION};
use annobench::evalkit::{emit_report, metrics, ConfusionCounts, Format, Report, SliceDescriptor};
use serde_json::{json, Value};

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

#[test]
fn emitted_metrics_validate() {
    let s = schema("metrics-report.v1.json");
    let full = metrics(ConfusionCounts {
        tp: 7,
        fp: 3,
        fn_: 5,
        tn: 5,
    })
    .unwrap()
    .with_slice(SliceDescriptor {
        model: Some("gpt-4".into()),
        prompt_id: Some("expert+UC".into()),
        ..Default::default()
    });
    // no predicted positives: precision and f1 are absent
    let sparse = metrics(ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: 3,
        tn: 2,
    })
    .unwrap();
    for reports in [vec![full.clone()], vec![full, sparse.clone()], vec![sparse]] {
        let bytes = emit_report(Report::Metrics(&reports), Format::Json).unwrap();
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert!(s.is_valid(&v), "{v}");
        assert_eq!(parse_metrics(&bytes).unwrap().len(), reports.len());
    }
}

#[test]
fn schema_and_reader_agree_on_bad_documents() {
    let s = schema("metrics-report.v1.json");
    let bad = [
        json!({"accuracy": 0.5}),
        json!({"counts": {"tp": 1, "fp": 0, "fn": 0, "tn": 1}, "accuracy": 1.5}),
        json!({"counts": {"tp": -1, "fp": 0, "fn": 0, "tn": 1}, "accuracy": 0.5}),
        json!([]),
    ];
    for v in bad {
        assert!(!s.is_valid(&v), "schema accepted {v}");
        assert!(parse_metrics(v.to_string().as_bytes()).is_err(), "reader accepted {v}");
    }
    let extra = json!({"counts": {"tp": 1, "fp": 0, "fn": 0, "tn": 1}, "accuracy": 1.0, "eval_loss": 0.2});
    assert!(s.is_valid(&extra));
    assert!(parse_metrics(extra.to_string().as_bytes()).is_ok());
}

#[test]
fn written_job_validates() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| -> PathBuf { dir.path().join(n) };
    let job = AdapterJob {
        schema_version: JOB_SCHEMA_VERSION,
        model: "allenai/specter".into(),
        corpus: vec![p("corpus.jsonl")],
        train: p("train.csv"),
        validation: p("validation.csv"),
        test: None,
        output_dir: p("model"),
        metrics_path: p("metrics.json"),
        hyperparameters: AdapterHyperparameters::default(),
        hardware: json!({"tpu_num_cores": 8, "bf16": true}),
    };
    job.write(&p("job.json")).unwrap();
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p("job.json")).unwrap()).unwrap();
    let s = schema("adapter-job.v1.json");
    assert!(s.is_valid(&v), "{v}");
    let mut wrong = v.clone();
    wrong["schema_version"] = json!(2);
    assert!(!s.is_valid(&wrong));
}
