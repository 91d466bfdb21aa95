use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

/// Directory for intermediate files, if set.
pub const TMPDIR_ENV: &str = "ROLLGAN_TMPDIR";

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn staging_dir(path: &Path) -> PathBuf {
    std::env::var_os(TMPDIR_ENV).map(PathBuf::from).unwrap_or_else(|| parent_of(path))
}

/// Writes `bytes` to a temporary file and renames it over `path`, so a
/// failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let staging = staging_dir(path);
    fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
    let mut tmp = NamedTempFile::new_in(&staging).with_context(|| format!("creating a temporary file in {}", staging.display()))?;
    tmp.write_all(bytes).and_then(|_| tmp.flush()).with_context(|| format!("writing {}", path.display()))?;
    match tmp.persist(path) {
        Ok(_) => Ok(()),
        // staging dir on another filesystem: copy next to the target first
        Err(_) if staging != parent_of(path) => {
            let mut local = NamedTempFile::new_in(parent_of(path)).with_context(|| format!("writing {}", path.display()))?;
            local.write_all(bytes).and_then(|_| local.flush()).with_context(|| format!("writing {}", path.display()))?;
            local.persist(path).map(|_| ()).with_context(|| format!("writing {}", path.display()))
        }
        Err(e) => Err(e.error).with_context(|| format!("writing {}", path.display())),
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
