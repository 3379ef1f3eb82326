//! Output directory bookkeeping: every file carries the config hash and is
//! listed in `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use zakharov::io::{self, Dtype, Manifest};
use zakharov::{Field, SpacetimeField};

pub struct Output {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Output {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn hash(&self) -> &str {
        &self.manifest.config_hash
    }

    fn record(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_output(&self.dir, path)?;
        Ok(())
    }

    /// CSV with a leading `# config_hash=` comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("# config_hash={}\n{body}", self.hash()))?;
        self.record(&path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let wrapped = serde_json::json!({
            "config_hash": self.hash(),
            "data": value,
        });
        let path = self.dir.join(name);
        io::write_json(&path, &wrapped)?;
        self.record(&path)
    }

    pub fn field(&mut self, name: &str, f: &Field, dtype: Dtype) -> Result<()> {
        let hash = self.hash().to_string();
        let (a, b) = io::write_field(&self.dir.join(name), f, dtype, Some(&hash))?;
        self.record(&a)?;
        self.record(&b)
    }

    pub fn spacetime(&mut self, name: &str, f: &SpacetimeField, dtype: Dtype) -> Result<()> {
        let hash = self.hash().to_string();
        let (a, b) = io::write_spacetime(&self.dir.join(name), f, dtype, Some(&hash))?;
        self.record(&a)?;
        self.record(&b)
    }

    /// Write the manifest last; it lists everything written before it.
    pub fn finish(self) -> Result<()> {
        io::write_json(&self.dir.join("manifest.json"), &self.manifest)?;
        Ok(())
    }
}
