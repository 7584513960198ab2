//! Flat `key = value` configuration files.

use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Config {
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub store: Option<PathBuf>,
}

pub fn parse(text: &str, origin: &str) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |col: usize, msg: String| CliError::Usage(format!("{origin}:{}:{}: {msg}", i + 1, col));
        let Some((key, value)) = line.split_once('=') else {
            return Err(at(1, "expected key = value".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        let vcol = raw.find('=').map_or(1, |p| p + 2);
        match key {
            "tol" => cfg.tol = Some(value.parse().map_err(|_| at(vcol, format!("bad number {value:?}")))?),
            "threads" => cfg.threads = Some(value.parse().map_err(|_| at(vcol, format!("bad count {value:?}")))?),
            "store" => cfg.store = Some(PathBuf::from(value)),
            other => return Err(at(raw.find(other).map_or(1, |p| p + 1), format!("unknown key {other:?}"))),
        }
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}
