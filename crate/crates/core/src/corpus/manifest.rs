use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::Result;

/// One file in a corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// Overrides the grid resolution; MIDI defaults to half the file's
    /// ticks per quarter note, text to one tick per eighth.
    pub ticks_per_eighth: Option<u64>,
}

impl ManifestEntry {
    pub fn new(path: PathBuf, ticks_per_eighth: Option<u64>) -> Self {
        Self {
            path,
            ticks_per_eighth,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Path(PathBuf),
    Detailed {
        path: PathBuf,
        #[serde(default)]
        ticks_per_eighth: Option<u64>,
    },
}

/// Reads a JSON manifest: a list whose items are either a path string or
/// `{"path": ..., "ticks_per_eighth": N}`. Relative paths resolve against
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let raw: Vec<RawEntry> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(raw
        .into_iter()
        .map(|r| {
            let (p, tpe) = match r {
                RawEntry::Path(p) => (p, None),
                RawEntry::Detailed {
                    path,
                    ticks_per_eighth,
                } => (path, ticks_per_eighth),
            };
            let p = if p.is_relative() { base.join(p) } else { p };
            ManifestEntry::new(p, tpe)
        })
        .collect())
}
