use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST: &str = "MANIFEST.json";

/// Output directory that remembers the hash of every file it writes.
pub struct OutputTree {
    root: PathBuf,
    files: BTreeMap<String, (String, usize)>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    sha256: &'a str,
    bytes: usize,
}

impl OutputTree {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputTree {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> CliResult<()> {
        fs::write(self.root.join(name), contents)?;
        let digest = hex::encode(Sha256::digest(contents));
        self.files.insert(name.to_string(), (digest, contents.len()));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// `x,y,err` triples for external plotting.
    pub fn write_plot(&mut self, name: &str, header: &serde_json::Value, rows: &[(f64, f64, f64)]) -> CliResult<()> {
        let mut out = format!("# {}\nx,y,err\n", serde_json::to_string(header)?);
        for (x, y, e) in rows {
            out.push_str(&format!("{x},{y},{e}\n"));
        }
        self.write(&format!("plot_{name}.csv"), out.as_bytes())
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, (h, _))| (k.clone(), h.clone())).collect()
    }

    /// Writes `MANIFEST.json` listing every artifact written so far.
    pub fn finish(self, config: &serde_json::Value) -> CliResult<BTreeMap<String, String>> {
        let entries: Vec<ManifestEntry> = self
            .files
            .iter()
            .map(|(path, (sha256, bytes))| ManifestEntry {
                path,
                sha256,
                bytes: *bytes,
            })
            .collect();
        let manifest = serde_json::json!({ "config": config, "files": entries });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), &text)?;
        Ok(self.hashes())
    }
}

/// CSV text with the provenance header as its first line.
pub fn csv(header: &serde_json::Value, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut out = format!("# {}\n{}\n", serde_json::to_string(header)?, columns.join(","));
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}
