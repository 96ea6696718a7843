//! Atomic file output and the run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Writes through a temporary file in the target directory and renames it into
/// place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(CliError::io(&dir))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut buf).map_err(CliError::io(path))?;
        buf.flush().map_err(CliError::io(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// Header plus rows, one serialized record per row.
pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for r in rows {
            out.serialize(r).map_err(std::io::Error::other)?;
        }
        out.flush()
    })
}

/// Same, for rows whose width is only known at run time.
pub fn write_csv_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header).map_err(std::io::Error::other)?;
        for r in rows {
            out.write_record(r).map_err(std::io::Error::other)?;
        }
        out.flush()
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct RunEntry {
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub pass: Option<bool>,
    pub abort: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunEntry>,
    pub wall_clock_secs: f64,
    /// `None` when the command has no checks.
    pub pass: Option<bool>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, mut runs: Vec<RunEntry>, started: std::time::Instant) -> Self {
        runs.sort_by_key(|r| r.seed);
        let pass = if runs.iter().any(|r| r.pass.is_some()) {
            Some(runs.iter().all(|r| r.pass != Some(false) && r.abort.is_none()))
        } else {
            None
        };
        Manifest {
            command: command.into(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").into(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            runs,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            pass,
        }
    }
}
