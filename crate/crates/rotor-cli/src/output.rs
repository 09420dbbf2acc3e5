//! Artifact writing: CSV data files and JSON run summaries.
//!
//! CSV uses '.' decimals, '\n' line endings, and always carries a header
//! row, so repeated runs with the same configuration are byte-identical.

use serde::Serialize;
use std::fs;
use std::path::Path;

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let mut buf = String::with_capacity(256);
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, line: String) {
        self.buf.push_str(&line);
        self.buf.push('\n');
    }
}

pub fn write_csv(out: &Path, command: &str, csv: Csv) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let path = out.join(format!("{command}.csv"));
    fs::write(&path, csv.buf).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn write_summary(
    out: &Path,
    command: &str,
    config: impl Serialize,
    results: serde_json::Value,
) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let summary = serde_json::json!({
        "config": config,
        "results": results,
    });
    let mut body = serde_json::to_string_pretty(&summary).expect("serializable");
    body.push('\n');
    let path = out.join(format!("{command}.json"));
    fs::write(&path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
