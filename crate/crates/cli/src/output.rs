use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crater_sr::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Identifies the tool version, configuration and seed behind an output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            tool: "crater-sr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed(),
        }
    }

    /// Single-line form used as a comment in CSV and PGM headers.
    pub fn line(&self) -> String {
        format!(
            "provenance: {} {} config_sha256={} seed={}",
            self.tool, self.version, self.config_sha256, self.seed
        )
    }
}

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = parent_of(path);
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Builds a directory in a sibling temporary location, then swaps it in.
pub fn write_dir_atomic(path: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = parent_of(path);
    fs::create_dir_all(dir)?;
    let tmp = tempfile::Builder::new().prefix(".tmp-").tempdir_in(dir)?;
    fill(tmp.path())?;
    if path.exists() {
        fs::remove_dir_all(path)?;
    }
    let staged: PathBuf = tmp.keep();
    fs::rename(&staged, path)?;
    Ok(())
}
