//! Artifact and manifest writing. All files go through one [`Report`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vygotsky::numfmt::canonical_json;

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub input_sha256: Option<String>,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Buffers artifacts in memory and writes them together with the manifest.
pub struct Report {
    dir: PathBuf,
    primary: Option<String>,
    files: BTreeMap<String, Vec<u8>>,
}

impl Report {
    /// `out` ending in `.json` names the main artifact; anything else is a directory.
    pub fn new(out: &Path) -> Self {
        let is_file = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_file {
            let dir = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let name = out.file_name().map(|n| n.to_string_lossy().into_owned());
            Self {
                dir,
                primary: name,
                files: BTreeMap::new(),
            }
        } else {
            Self {
                dir: out.to_path_buf(),
                primary: None,
                files: BTreeMap::new(),
            }
        }
    }

    /// Adds the command's main JSON artifact under `default_name`, or under the
    /// file name given in `--out`.
    pub fn primary_json<T: Serialize>(&mut self, default_name: &str, value: &T) -> Result<(), CliError> {
        let name = self.primary.clone().unwrap_or_else(|| default_name.to_string());
        self.json(&name, value)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = canonical_json(value).map_err(|e| CliError::Data(format!("cannot serialize {name}: {e}")))?;
        self.text(name, text);
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: String) {
        self.files.insert(name.to_string(), contents.into_bytes());
    }

    pub fn finish(self, command: &str, config: &RunConfig, input_sha256: Option<String>) -> Result<Manifest, CliError> {
        if self.files.contains_key(MANIFEST) {
            return Err(CliError::Usage(format!("output file may not be named {MANIFEST}")));
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let mut hashes = BTreeMap::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
            hashes.insert(name.clone(), sha256_hex(bytes));
        }
        let config_json: serde_json::Value =
            serde_json::from_str(&config.canonical()).expect("canonical config is valid JSON");
        let manifest = Manifest {
            command: command.to_string(),
            config: config_json,
            config_hash: config.hash(),
            seed: config.seed,
            input_sha256,
            files: hashes,
        };
        let path = self.dir.join(MANIFEST);
        let text = canonical_json(&manifest).map_err(|e| CliError::Data(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_suffix_selects_file_mode() {
        let r = Report::new(Path::new("runs/d.json"));
        assert_eq!(r.dir, PathBuf::from("runs"));
        assert_eq!(r.primary.as_deref(), Some("d.json"));
        let r = Report::new(Path::new("d.json"));
        assert_eq!(r.dir, PathBuf::from("."));
        let r = Report::new(Path::new("runs/out"));
        assert_eq!(r.dir, PathBuf::from("runs/out"));
        assert!(r.primary.is_none());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
