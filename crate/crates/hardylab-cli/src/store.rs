//! Append-only JSON-lines store of run records.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL_VERSION: &str = concat!("hardylab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub timestamp: String,
    pub command: String,
    pub params: Value,
    pub outputs: Value,
    /// The CSV rendering of `outputs`, when the command has one.
    pub csv: Option<String>,
    pub exit_code: i32,
    pub version: String,
}

/// Hex SHA-256 of the canonical JSON of (command, params, version).
/// `serde_json` maps keep keys sorted, so equal inputs hash equally.
pub fn run_id(command: &str, params: &Value) -> String {
    let key = serde_json::json!({ "command": command, "params": params, "version": TOOL_VERSION });
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

pub struct Store {
    path: PathBuf,
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn find(file: &File, path: &Path, id: &str) -> Result<Option<RunRecord>, CliError> {
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Io(format!("{}:{}: corrupt record: {e}", path.display(), n + 1)))?;
        if rec.id == id {
            return Ok(Some(rec));
        }
    }
    Ok(None)
}

impl Store {
    pub fn new(path: PathBuf) -> Self {
        Self { path }
    }

    pub fn lookup(&self, id: &str) -> Result<Option<RunRecord>, CliError> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io(&self.path, e)),
        };
        file.lock_shared().map_err(|e| io(&self.path, e))?;
        find(&file, &self.path, id)
    }

    /// Appends `rec` unless a record with the same id is already present;
    /// returns the stored record either way.
    pub fn append(&self, rec: RunRecord) -> Result<RunRecord, CliError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&self.path)
            .map_err(|e| io(&self.path, e))?;
        file.lock().map_err(|e| io(&self.path, e))?;
        file.seek(SeekFrom::Start(0)).map_err(|e| io(&self.path, e))?;
        if let Some(existing) = find(&file, &self.path, &rec.id)? {
            return Ok(existing);
        }
        let mut line = serde_json::to_string(&rec).expect("run record serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(|e| io(&self.path, e))?;
        file.sync_data().map_err(|e| io(&self.path, e))?;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, out: i64) -> RunRecord {
        RunRecord {
            id: id.into(),
            timestamp: "t".into(),
            command: "c".into(),
            params: Value::Null,
            outputs: Value::from(out),
            csv: None,
            exit_code: 0,
            version: TOOL_VERSION.into(),
        }
    }

    #[test]
    fn ids_ignore_key_order() {
        let a: Value = serde_json::from_str(r#"{"x":1,"y":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y":[1,2],"x":1}"#).unwrap();
        assert_eq!(run_id("c", &a), run_id("c", &b));
        assert_ne!(run_id("c", &a), run_id("d", &a));
    }

    #[test]
    fn append_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path().join("runs.jsonl"));
        assert_eq!(store.lookup("a").unwrap(), None);
        store.append(record("a", 1)).unwrap();
        let again = store.append(record("a", 2)).unwrap();
        assert_eq!(again.outputs, Value::from(1));
        store.append(record("b", 3)).unwrap();
        let text = std::fs::read_to_string(dir.path().join("runs.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(store.lookup("b").unwrap().unwrap().outputs, Value::from(3));
    }
}
