use std::path::{Path, PathBuf};

use hydrotier::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Attached to every JSON output and written as the first comment line of
/// every CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, config: &PipelineConfig) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        let digest = Sha256::digest(&bytes);
        Ok(Provenance {
            tool: "hydrotier".into(),
            version: VERSION.into(),
            command: command.into(),
            seed: config.seed,
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        })
    }

    /// CSV comment body (the writer adds the leading `# `).
    pub fn comment(&self) -> String {
        format!(
            "{} {} command={} seed={} config_sha256={}",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

/// Files written by one command. Unless [`Outputs::commit`] is called, every
/// tracked file is deleted on drop, so a failing command leaves nothing
/// half-written behind.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes through a temporary sibling and renames into place.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".part");
        let tmp = PathBuf::from(tmp);
        std::fs::write(&tmp, bytes).map_err(|e| Error::Config(format!("cannot write {}: {e}", tmp.display())))?;
        self.written.push(path.to_path_buf());
        std::fs::rename(&tmp, path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(path, s.as_bytes())
    }

    /// Registers a file produced by some other writer.
    pub fn track(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = std::fs::remove_file(p);
            let mut tmp = p.as_os_str().to_owned();
            tmp.push(".part");
            let _ = std::fs::remove_file(PathBuf::from(tmp));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        {
            let mut o = Outputs::new();
            o.write(&a, b"x").unwrap();
            assert!(a.exists());
        }
        assert!(!a.exists());
        let mut o = Outputs::new();
        o.write(&a, b"x").unwrap();
        o.commit();
        assert!(a.exists());
    }

    #[test]
    fn hash_tracks_config() {
        let a = Provenance::new("x", &PipelineConfig::default()).unwrap();
        let c = PipelineConfig {
            cv_folds: 3,
            ..PipelineConfig::default()
        };
        let b = Provenance::new("x", &c).unwrap();
        assert_eq!(a.config_sha256.len(), 64);
        assert_ne!(a.config_sha256, b.config_sha256);
    }
}
