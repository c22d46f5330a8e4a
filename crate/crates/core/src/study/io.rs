//! On-disk formats: binary snapshot matrices, CSV tables and manifests.
//!
//! Snapshot files: `"LDSN"`, `u32` version, `u64` rows, `u64` cols, then
//! row-major `f64`, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::checkpoint::read_f64s;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"LDSN";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const CSV_VERSION: u32 = 1;

pub fn write_snapshot_matrix(m: &Matrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot_matrix(path: &Path) -> Result<Matrix> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut head = [0u8; 24];
    r.read_exact(&mut head)
        .map_err(|_| bad("file shorter than the header".into()))?;
    if &head[0..4] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let rows = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(head[16..24].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24));
    if expected != Some(len) {
        return Err(bad(format!(
            "payload size does not match a {rows}x{cols} matrix ({len} bytes)"
        )));
    }
    let data = read_f64s(&mut r, (rows * cols) as usize)?;
    Matrix::from_vec(rows as usize, cols as usize, data)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_checksum(path: &Path) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = r.read(&mut buf)?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Self-describing header shared by all text outputs.
pub fn header(kind: &str, config_hash: &str, seed: u64) -> String {
    format!("# dlrom {kind} v{CSV_VERSION}\n# config_hash = {config_hash}\n# seed = {seed}\n")
}

/// Writes a CSV: header comments, then the column line, then the rows.
pub fn write_csv(
    path: &Path,
    kind: &str,
    config_hash: &str,
    seed: u64,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header(kind, config_hash, seed).as_bytes())?;
    writeln!(w, "{}", columns.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the data rows of a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines
        .next()
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: "missing column line".into(),
        })?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((cols, rows))
}

/// `key = value` manifest under the shared header.
pub fn write_manifest(
    path: &Path,
    kind: &str,
    config_hash: &str,
    seed: u64,
    entries: &[(&str, String)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header(kind, config_hash, seed).as_bytes())?;
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Entries of a manifest written by [`write_manifest`].
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| {
            let l = l.trim_start_matches('#').trim();
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect())
}
