//! Dataset manifests: one `relative/path<TAB>label` line per example,
//! paths resolved against the manifest's own directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Absolute path after joining with the manifest directory.
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let (rel, label) = line.split_once('\t').ok_or_else(|| {
                Error::Format {
                    offset: 0,
                    detail: format!(
                        "{}:{}: expected 'path<TAB>label', got '{line}'",
                        path.display(),
                        lineno + 1
                    ),
                }
            })?;
            let label: usize = label.trim().parse().map_err(|_| Error::Format {
                offset: 0,
                detail: format!("{}:{}: bad label '{label}'", path.display(), lineno + 1),
            })?;
            entries.push(ManifestEntry { path: base.join(rel), label });
        }
        if entries.is_empty() {
            return Err(Error::Contract(format!("manifest {} lists no examples", path.display())));
        }
        Ok(Manifest { entries })
    }

    /// Writes `relative<TAB>label` lines; paths must already be relative.
    pub fn write(path: impl AsRef<Path>, rows: &[(String, usize)]) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for (rel, label) in rows {
            text.push_str(rel);
            text.push('\t');
            text.push_str(&label.to_string());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Errors unless every label is below `num_classes` and every file exists.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        for e in &self.entries {
            if e.label >= num_classes {
                return Err(Error::Contract(format!(
                    "label {} out of range for {num_classes} classes ({})",
                    e.label,
                    e.path.display()
                )));
            }
            if !e.path.exists() {
                return Err(Error::Io {
                    path: e.path.display().to_string(),
                    detail: "listed in manifest but missing".into(),
                });
            }
        }
        Ok(())
    }
}
