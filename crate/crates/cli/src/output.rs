use std::fmt::Display;
use std::fs;
use std::path::Path;

use gyrolev::Uncertain;

use crate::error::CliError;

/// Ordered `key = value` report.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    /// `key` and `key_sigma`, both multiplied by `unit`.
    pub fn push_uncertain(&mut self, key: &str, u: Uncertain, unit: f64) {
        self.push(key, u.value() * unit);
        self.push(format!("{key}_sigma"), u.sigma() * unit);
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Writes through a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
