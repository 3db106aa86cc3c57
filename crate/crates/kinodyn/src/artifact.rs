//! Shared helpers for on-disk artifacts: little-endian binary blobs paired
//! with JSON headers that carry a SHA-256 manifest hash of the payload.

use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Sibling data path for a JSON header: swaps the extension for `.bin`.
pub fn data_path_for(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

pub fn f32s_to_le_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn f32s_from_le_bytes(bytes: &[u8]) -> std::io::Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "binary float payload length is not a multiple of 4",
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)
}

pub fn read_bytes(path: &Path) -> std::io::Result<Vec<u8>> {
    let mut f = std::fs::File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Reads a data payload and checks it against the expected manifest hash.
pub fn read_verified(path: &Path, expected_sha256: &str) -> std::io::Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    let actual = sha256_hex(&bytes);
    if actual != expected_sha256 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "manifest hash mismatch for {}: expected {expected_sha256}, found {actual}",
                path.display()
            ),
        ));
    }
    Ok(bytes)
}
