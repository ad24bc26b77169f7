use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::StreamSeeds;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Record of one completed command. Its presence in an output directory
/// marks the run as finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    pub crate_version: String,
    pub config: Option<PathBuf>,
    pub parameters: serde_json::Value,
    pub seeds: Option<StreamSeeds>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub format_versions: BTreeMap<String, u32>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>) -> Self {
        Self {
            manifest_version: MANIFEST_FORMAT_VERSION,
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.map(Path::to_path_buf),
            parameters: serde_json::Value::Null,
            seeds: None,
            artifacts: Vec::new(),
            format_versions: BTreeMap::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Writes `manifest.json` through a temporary file and a rename, so a
    /// reader never sees a partial manifest.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for a in &self.artifacts {
            let p = dir.join(a);
            if !p.is_file() {
                return Err(Error::Format(format!("artifact {} is missing", p.display())));
            }
        }
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        let mut json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        json.push('\n');
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Creates `dir` and removes a manifest left by an earlier run.
pub fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    match std::fs::remove_file(&path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}
