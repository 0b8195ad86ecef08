//! Run directories: every file written through [`RunDir`] is checksummed and
//! listed in `manifest.json`, which is written last.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Some sub-runs failed; the files listed are still valid.
    Partial,
    NumericalFailure,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: Status,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    errors: &'a [String],
    files: &'a [FileEntry],
    details: &'a T,
}

pub struct RunDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    /// Writes `contents` to `relative` (slash-separated) below the root.
    pub fn write(&mut self, relative: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileEntry {
            path: relative.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, relative: &str, value: &T) -> Result<(), CliError> {
        self.write(relative, &pcdnse::io::to_json(value)?)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish<T: Serialize>(self, command: &str, status: Status, errors: &[String], details: &T) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            status,
            errors,
            files: &self.files,
            details,
        };
        let path = self.root.join("manifest.json");
        let text = pcdnse::io::to_json(&manifest)?;
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write("a/b.csv", "x\n1\n").unwrap();
        let path = run.finish("test", Status::Ok, &[], &serde_json::json!({})).unwrap();
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(m["files"][0]["path"], "a/b.csv");
        assert_eq!(m["files"][0]["sha256"], sha256_hex(b"x\n1\n"));
        assert_eq!(m["status"], "ok");
    }
}
