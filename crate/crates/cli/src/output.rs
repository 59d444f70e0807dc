//! Report envelope, deterministic JSON and CSV writers, and error records.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use partgeom::{Error, Result, Simplex};

pub const TOOL: &str = "partgeom";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializes through `Value`, whose maps keep keys sorted; floats use the
/// shortest round-trip form and non-finite values become `null`.
pub fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(format!("serialization failed: {e}")))
}

pub fn envelope(subcommand: &str, seed: Option<u64>, config: Value, result: Value, warnings: Vec<String>) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "result": result,
        "warnings": warnings,
    })
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Internal(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Internal(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush()?;
    Ok(path)
}

/// `0 1 2`, as used in CSV columns.
pub fn simplex_label(s: &Simplex) -> String {
    s.vertices().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) => "parse",
        Error::Input(_) | Error::Io(_) => "validation",
        Error::Internal(_) => "internal",
    }
}

/// Machine-readable error record on stderr, and in `error.json` when the
/// output directory is known.
pub fn report_error(subcommand: &str, e: &Error, code: u8, out: Option<&Path>) {
    let record = json!({
        "tool": TOOL,
        "version": VERSION,
        "subcommand": subcommand,
        "error": {
            "kind": error_kind(e),
            "exit_code": code,
            "message": e.to_string(),
        }
    });
    eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
    if let Some(dir) = out {
        let _ = write_json(dir, "error.json", &record);
    }
}
