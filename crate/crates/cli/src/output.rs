use std::fs;
use std::path::Path;

use datadiet::corpus::{load_manifest, DatasetManifest};
use datadiet::provenance::short_hash;

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::data("io", format!("cannot read {}: {e}", path.display())))
}

/// Short content hash of a file, for provenance records.
pub fn file_hash(path: &Path) -> Result<String, CliError> {
    Ok(short_hash(&read_file(path)?))
}

pub fn require_exists(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::data("io", format!("{} does not exist", path.display())))
    }
}

pub fn manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    Ok(load_manifest(path)?)
}
