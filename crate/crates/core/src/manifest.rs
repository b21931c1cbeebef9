//! Reproducibility manifest written next to every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(subcommand: impl Into<String>, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            config,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// `<file>.manifest.json` next to a single output file.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("target", serde_json::json!({"f": 2.0}), None);
        m.add_output(dir.path().join("report.json"));
        let path = RunManifest::path_for(&dir.path().join("report.json"));
        assert!(path.ends_with("report.json.manifest.json"));
        m.write(&path).unwrap();
        let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.tool_version, TOOL_VERSION);
    }
}
