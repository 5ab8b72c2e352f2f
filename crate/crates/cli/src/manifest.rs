use std::collections::BTreeMap;
use std::fs;
use std::path::{ Path, PathBuf };

use anyhow::{ bail, Context, Result };
use serde::{ Deserialize, Serialize };

use crate::config::{ hex_digest, RunConfig };

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation. Written once, by the driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub files: Vec<OutputFile>,
    pub flags: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl ResultManifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config_hash: config.hash()?,
            config: config.clone(),
            files: Vec::new(),
            flags: Vec::new(),
            timings: BTreeMap::new(),
            notes: BTreeMap::new(),
        })
    }

    /// Writes `contents` under the output directory and records it.
    pub fn write_file(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(OutputFile { path: name.into(), sha256: hex_digest(contents) });
        Ok(path)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        fs::create_dir_all(dir)?;
        fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the config hash and the hashes of all listed files.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let expected = self.config.hash()?;
        if expected != self.config_hash {
            bail!("config hash mismatch: manifest has {}, config hashes to {expected}", self.config_hash);
        }
        for f in &self.files {
            let bytes = fs::read(dir.join(&f.path)).with_context(|| format!("reading {}", f.path))?;
            if hex_digest(&bytes) != f.sha256 {
                bail!("{} does not match its recorded hash", f.path);
            }
        }
        Ok(())
    }
}
