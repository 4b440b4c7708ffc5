use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use survcash::survival::SupportWindow;

/// Everything that determines a command's output. Two runs with equal
/// manifests produce byte-identical files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub inputs: Vec<InputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<SupportWindow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    pub options: BTreeMap<&'static str, String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs: Vec::new(),
            window: None,
            rate: None,
            alpha: None,
            seed: None,
            replicates: None,
            options: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn option(&mut self, key: &'static str, value: impl ToString) {
        self.options.insert(key, value.to_string());
    }

    /// Writes the manifest next to every recorded output.
    pub fn write(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        for out in &self.outputs {
            let path = manifest_path(Path::new(out));
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Reads an input file and records its hash in the manifest.
pub fn read_input(manifest: &mut RunManifest, path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.inputs.push(InputFile {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    });
    Ok(bytes)
}

pub fn write_output(manifest: &mut RunManifest, path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}
