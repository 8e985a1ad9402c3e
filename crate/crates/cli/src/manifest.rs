use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything needed to re-run a command, written next to its outputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub discharge_type: Option<String>,
    pub year: Option<i32>,
    pub algorithm: Option<String>,
    pub seed: Option<u64>,
    /// Command-specific settings and counters.
    pub config: Value,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            out_dir: out_dir.to_path_buf(),
            config: Value::Null,
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.inputs.insert(name.to_string(), path.to_path_buf());
        self
    }

    /// `manifest-<command>[-<algorithm>].json` inside `out_dir`.
    pub fn write(&self) -> Result<PathBuf> {
        let name = match &self.algorithm {
            Some(a) => format!("manifest-{}-{}.json", self.command, a),
            None => format!("manifest-{}.json", self.command),
        };
        let path = self.out_dir.join(name);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("bad manifest {}", path.display()))
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_carries_the_algorithm() {
        let tmp = tempfile::TempDir::new().unwrap();
        let dir = tmp.path();
        let mut m = RunManifest::new("detect", dir);
        m.input("edges", Path::new("edges.tsv"));
        assert_eq!(m.write().unwrap(), dir.join("manifest-detect.json"));
        m.algorithm = Some("slpa".into());
        let path = m.write().unwrap();
        assert_eq!(path, dir.join("manifest-detect-slpa.json"));
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back.inputs["edges"], PathBuf::from("edges.tsv"));
        assert_eq!(back.version, env!("CARGO_PKG_VERSION"));
    }
}
