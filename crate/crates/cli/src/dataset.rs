use std::path::{Path, PathBuf};

use stegadv_core::jpegio::decode_jpeg;
use stegadv_core::CoefficientImage;

use crate::commands::Failure;

/// Files in `dir` whose extension matches one of `exts`, sorted by name.
pub fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, Failure> {
    let rd = std::fs::read_dir(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Failure::data(e.to_string()))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_jpeg(path: &Path) -> Result<CoefficientImage, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    decode_jpeg(&bytes).map_err(|e| Failure::from(e).context(path))
}

/// All JPEGs in `dir` and their ids (file stems).
pub fn load_jpegs(dir: &Path) -> Result<(Vec<CoefficientImage>, Vec<String>), Failure> {
    let files = list_files(dir, &["jpg", "jpeg"])?;
    let mut imgs = Vec::with_capacity(files.len());
    let mut ids = Vec::with_capacity(files.len());
    for f in &files {
        imgs.push(read_jpeg(f)?);
        ids.push(stem(f));
    }
    Ok((imgs, ids))
}

/// Like [`load_jpegs`] but an empty directory is a usage error.
pub fn load_covers(dir: &Path) -> Result<(Vec<CoefficientImage>, Vec<String>), Failure> {
    let (imgs, ids) = load_jpegs(dir)?;
    if imgs.is_empty() {
        return Err(Failure::usage(format!("no JPEG covers in {}", dir.display())));
    }
    Ok((imgs, ids))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Message bytes to one bit per byte, most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |k| (b >> k) & 1))
        .collect()
}

pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}
