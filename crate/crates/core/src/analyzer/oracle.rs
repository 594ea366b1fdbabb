//! File protocol for an external gradient oracle.
//!
//! The tool writes `manifest.json` and one SCF1 coefficient file per cover
//! (and per stego, when the oracle is expected to train first). The oracle
//! answers with one SCF1 float64 gradient plane per cover, holding
//! `d(logit_stego - logit_cover)/d coefficient` at the cover, then creates
//! the `DONE` sentinel.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{coefficient_gradient, AnalyzerModel, GradientMap};
use crate::error::{Error, Result};
use crate::jpegio::container::{read_coefficients, read_gradient, write_coefficients, write_gradient};
use crate::jpegio::CoefficientImage;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SENTINEL_FILE: &str = "DONE";
pub const SCALAR_TAG: &str = "logit_diff_at_cover";
pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_SECS: u64 = 3600;
const POLL_INTERVAL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub cover_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stego_file: Option<String>,
    pub gradient_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub scalar: String,
    /// Training round the request belongs to, if any.
    #[serde(default)]
    pub round: Option<usize>,
    pub entries: Vec<ManifestEntry>,
}

/// Writes a request into `dir`, clearing any stale sentinel or gradient files.
/// Entries that carry a stego form the pairs the oracle should train on
/// before answering.
pub fn write_request(
    dir: &Path,
    ids: &[String],
    covers: &[CoefficientImage],
    stegos: Option<&[Option<&CoefficientImage>]>,
    round: Option<usize>,
) -> Result<Manifest> {
    if ids.len() != covers.len() || stegos.is_some_and(|s| s.len() != covers.len()) {
        return Err(Error::InvalidArgument("oracle request lists are not aligned".into()));
    }
    std::fs::create_dir_all(dir)?;
    remove_if_present(&dir.join(SENTINEL_FILE))?;
    let mut entries = Vec::with_capacity(covers.len());
    for (i, (id, cover)) in ids.iter().zip(covers).enumerate() {
        let cover_file = format!("cover_{id}.scf1");
        std::fs::write(dir.join(&cover_file), write_coefficients(cover)?)?;
        let stego_file = match stegos.and_then(|s| s[i]) {
            Some(s) => {
                let f = format!("stego_{id}.scf1");
                std::fs::write(dir.join(&f), write_coefficients(s)?)?;
                Some(f)
            }
            None => None,
        };
        let gradient_file = format!("grad_{id}.scf1");
        remove_if_present(&dir.join(&gradient_file))?;
        entries.push(ManifestEntry {
            id: id.clone(),
            cover_file,
            stego_file,
            gradient_file,
        });
    }
    let manifest = Manifest {
        version: PROTOCOL_VERSION,
        scalar: SCALAR_TAG.into(),
        round,
        entries,
    };
    // written last and renamed into place, so a watcher never sees a partial manifest
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    std::fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)?;
    std::fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn remove_if_present(p: &Path) -> Result<()> {
    match std::fs::remove_file(p) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_FILE))?)?;
    if m.version != PROTOCOL_VERSION || m.scalar != SCALAR_TAG {
        return Err(Error::InvalidArgument(format!(
            "unsupported oracle manifest (version {}, scalar {:?})",
            m.version, m.scalar
        )));
    }
    Ok(m)
}

/// Blocks until the sentinel appears, then loads and validates every gradient plane.
pub fn await_gradients(
    dir: &Path,
    manifest: &Manifest,
    covers: &[CoefficientImage],
    timeout: Duration,
) -> Result<Vec<GradientMap>> {
    let start = Instant::now();
    let sentinel = dir.join(SENTINEL_FILE);
    while !sentinel.exists() {
        if start.elapsed() >= timeout {
            return Err(Error::OracleTimeout(timeout.as_secs()));
        }
        std::thread::sleep(POLL_INTERVAL.min(timeout.saturating_sub(start.elapsed())));
    }
    manifest
        .entries
        .iter()
        .zip(covers)
        .map(|(e, cover)| {
            let path: PathBuf = dir.join(&e.gradient_file);
            let bytes = match std::fs::read(&path) {
                Ok(b) => b,
                Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                    return Err(Error::OracleIncomplete(path))
                }
                Err(err) => return Err(err.into()),
            };
            let g = read_gradient(&bytes)?;
            if (g.width, g.height) != cover.dims() {
                return Err(Error::shape(cover.dims(), (g.width, g.height)));
            }
            Ok(g)
        })
        .collect()
}

/// Full round trip: write the request, wait for the answer.
pub fn external_oracle_gradient(
    dir: &Path,
    ids: &[String],
    covers: &[CoefficientImage],
    stegos: Option<&[Option<&CoefficientImage>]>,
    round: Option<usize>,
    timeout: Duration,
) -> Result<Vec<GradientMap>> {
    let manifest = write_request(dir, ids, covers, stegos, round)?;
    log::info!(
        "waiting for gradient oracle in {} ({} covers)",
        dir.display(),
        covers.len()
    );
    await_gradients(dir, &manifest, covers, timeout)
}

/// Answers a pending request with the built-in analyzer. The model is fixed;
/// stego files, if present, are ignored.
pub fn serve_with_model(dir: &Path, model: &AnalyzerModel) -> Result<()> {
    let manifest = read_manifest(dir)?;
    for e in &manifest.entries {
        let cover = read_coefficients(&std::fs::read(dir.join(&e.cover_file))?)?;
        let g = coefficient_gradient(model, &cover)?;
        std::fs::write(dir.join(&e.gradient_file), write_gradient(&g)?)?;
    }
    std::fs::write(dir.join(SENTINEL_FILE), b"")?;
    Ok(())
}
