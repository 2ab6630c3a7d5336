use std::path::{Path, PathBuf};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(path: impl AsRef<Path>) -> Value {
    let path = repo_root().join(path);
    serde_json::from_slice(&std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn validator(schema: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&load(format!("docs/{schema}"))).unwrap()
}

fn errors(validator: &jsonschema::Validator, doc: &Value) -> Vec<String> {
    validator.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path())).collect()
}

#[test]
fn golden_story_matches_schema() {
    let validator = validator("story_document.schema.json");
    let doc = load("crates/core/tests/golden/story_session-000001.json");
    assert_eq!(errors(&validator, &doc), Vec::<String>::new());
}

#[test]
fn story_schema_rejects_short_chapter() {
    let validator = validator("story_document.schema.json");
    let mut doc = load("crates/core/tests/golden/story_session-000001.json");
    doc["chapters"][2]["paragraphs"].as_array_mut().unwrap().pop();
    assert!(!validator.is_valid(&doc));

    let mut doc = load("crates/core/tests/golden/story_session-000001.json");
    doc["source_image"] = Value::String("leak".into());
    assert!(!validator.is_valid(&doc));
}

#[test]
fn analysis_report_matches_schema() {
    let data = repo_root().join("crates/analytics/tests/data");
    let report = triadtale_analytics::analyze_workshop_files(&data.join("workshop_pre.csv"), &data.join("workshop_post.csv"))
        .unwrap();
    let validator = validator("analysis_report.schema.json");
    let doc = serde_json::to_value(&report).unwrap();
    assert_eq!(errors(&validator, &doc), Vec::<String>::new());
}
