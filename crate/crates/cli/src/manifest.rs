//! Run manifests and guarded output writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance attached to every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, InputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
        })
    }

    /// Records the SHA-256 of an input file under `role`.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.insert(
            role.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256: hex::encode(digest.as_slice()),
            },
        );
        Ok(())
    }

    /// One-line JSON form used as the leading comment of tabular outputs.
    pub fn comment_line(&self) -> String {
        format!("# manifest {}\n", serde_json::to_string(self).expect("manifest serializes"))
    }
}

/// Writes outputs, refusing to replace existing files unless forced.
pub struct Outputs {
    force: bool,
    planned: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(force: bool) -> Self {
        Outputs {
            force,
            planned: Vec::new(),
        }
    }

    /// Declares an output up front so that a run fails before doing any
    /// work if it would clobber something.
    pub fn plan(&mut self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            bail!("{} already exists; pass --force to overwrite", path.display());
        }
        self.planned.push(path.to_path_buf());
        Ok(())
    }

    pub fn write(&self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        debug_assert!(self.planned.iter().any(|p| p == path), "unplanned output {}", path.display());
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json(&self, path: &Path, manifest: &RunManifest, body: impl Serialize) -> Result<()> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            manifest: &'a RunManifest,
            #[serde(flatten)]
            body: T,
        }
        let mut text = serde_json::to_string_pretty(&Report { manifest, body })?;
        text.push('\n');
        self.write(path, text)
    }

    pub fn write_table(&self, path: &Path, manifest: &RunManifest, table: &str) -> Result<()> {
        self.write(path, manifest.comment_line() + table)
    }
}
