//! Flat-file persistence: round-trip-safe numbers, headerless two-column
//! series and a hashed manifest.

use super::config::{sha256_hex, Emit};
use crate::error::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    emit: Emit,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path, emit: Emit) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            emit,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(OutputFile {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Plot series `stem.csv` (headerless, two columns) or `stem.json`
    /// (array of pairs), following the emit setting.
    pub fn series(&mut self, stem: &str, rows: &[(f64, f64)]) -> Result<()> {
        match self.emit {
            Emit::Csv => {
                let text: String = rows.iter().map(|&(x, y)| format!("{},{}\n", fmt(x), fmt(y))).collect();
                self.write(&format!("{stem}.csv"), text.as_bytes())
            }
            Emit::Json => {
                let pairs: Vec<[Option<f64>; 2]> = rows
                    .iter()
                    .map(|&(x, y)| [x.is_finite().then_some(x), y.is_finite().then_some(y)])
                    .collect();
                self.json(&format!("{stem}.json"), &pairs)
            }
        }
    }

    pub fn manifest(&self) -> Vec<OutputFile> {
        let mut files = self.files.clone();
        files.sort_by(|a, b| a.name.cmp(&b.name));
        files
    }
}
