#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    repo().join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn schema(name: &str) -> Value {
    let p = repo().join("docs/schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Validator for a published schema, or for one of its `$defs`.
pub fn validator(name: &str, def: Option<&str>) -> jsonschema::Validator {
    let mut s = schema(name);
    if let Some(d) = def {
        // a sibling $ref would be checked alongside the root keywords
        s = serde_json::json!({ "$schema": s["$schema"], "$defs": s["$defs"], "$ref": format!("#/$defs/{d}") });
    }
    jsonschema::validator_for(&s).unwrap()
}

pub fn assert_valid(name: &str, def: Option<&str>, doc: &Value) {
    let v = validator(name, def);
    let errs: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errs.is_empty(), "{name} {def:?}: {errs:#?}");
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_skyplan")
}

pub fn skyplan(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

pub fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}
