//! Report assembly and serialization: JSON payloads with reproducible
//! metadata, and CSV curve files with full-precision values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub tolerance_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub params: Value,
}

impl Metadata {
    pub fn new(command: &str, tolerance_scale: f64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            tolerance_scale,
            grid: None,
            seed: None,
            trials: None,
            params: Value::Null,
        }
    }
}

/// Assemble the standard three-part report.
pub fn experiment_report<T: Serialize>(metadata: &Metadata, payload: &T, verdicts: Value) -> Value {
    json!({
        "metadata": metadata,
        "payload": payload,
        "verdicts": verdicts,
    })
}

/// Write a report to the output path or stdout.
pub fn emit_json(report: &Value, output: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("serializable report");
    match output {
        Some(path) => fs::write(path, text + "\n"),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")
        }
    }
}

/// One `header,value`-style table with 17-significant-digit values and LF
/// line endings.
pub fn write_csv(
    path: &Path,
    header: (&str, &str),
    rows: impl Iterator<Item = (f64, f64)>,
) -> std::io::Result<()> {
    let mut text = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        text.push_str(&format!("{a:.16e},{b:.16e}\n"));
    }
    fs::write(path, text)
}

/// Sibling path `<stem>.<suffix>.csv` next to the chosen output.
pub fn csv_sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    output.with_file_name(format!("{stem}.{suffix}.csv"))
}
