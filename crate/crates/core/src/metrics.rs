//! Cost-change statistics, selection renderings and the security harness.

use std::collections::HashSet;
use std::fmt::Write as _;

use image::GrayImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::advloop::SelectionMask;
use crate::analyzer::kernels::hex;
use crate::analyzer::{accuracy, train, PairSet, TrainConfig};
use crate::cost::CostMap;
use crate::error::{Error, Result};
use crate::jpegio::CoefficientImage;

/// `(Σ|ρ⁺−ρ₀| + Σ|ρ⁻−ρ₀|) / (2·Σρ₀)` over positions that are dry in both maps.
pub fn relative_modification_rate(rho0: &CostMap, rho: &CostMap) -> Result<f64> {
    if rho0.dims() != rho.dims() {
        return Err(Error::shape(rho0.dims(), rho.dims()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in (0..rho0.len()).filter(|&i| !rho0.is_wet(i) && !rho.is_wet(i)) {
        let r0 = rho0.plus()[i];
        num += (rho.plus()[i] - r0).abs() + (rho.minus()[i] - r0).abs();
        den += r0;
    }
    if den == 0.0 {
        return Err(Error::Numerical("relative modification rate undefined: reference costs sum to 0".into()));
    }
    Ok(num / (2.0 * den))
}

/// Bins `0..=rounds`: how many positions were selected in exactly `k` rounds.
/// `audits` holds one list of per-round masks per image.
pub fn modification_frequency_histogram(audits: &[Vec<SelectionMask>], rounds: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; rounds + 1];
    for masks in audits {
        if masks.len() != rounds {
            return Err(Error::InvalidArgument(format!(
                "{} masks for {rounds} rounds",
                masks.len()
            )));
        }
        let Some(first) = masks.first() else {
            continue;
        };
        let mut per_pos = vec![0usize; first.selected.len()];
        for m in masks {
            if (m.width, m.height) != (first.width, first.height) {
                return Err(Error::shape((first.width, first.height), (m.width, m.height)));
            }
            for (c, &s) in per_pos.iter_mut().zip(&m.selected) {
                *c += usize::from(s);
            }
        }
        for c in per_pos {
            counts[c] += 1;
        }
    }
    Ok(counts)
}

/// Per-block selected fraction, `round(255 · count / 64)`, painted over each 8×8 block.
pub fn selection_overlay(mask: &SelectionMask) -> GrayImage {
    let (w, h) = (mask.width, mask.height);
    let bw = w.div_ceil(8);
    let mut density = vec![0u32; bw * h.div_ceil(8)];
    for y in 0..h {
        for x in 0..w {
            density[(y / 8) * bw + x / 8] += u32::from(mask.selected[y * w + x]);
        }
    }
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let d = density[(y as usize / 8) * bw + x as usize / 8];
        image::Luma([((255 * d) as f64 / 64.0).round() as u8])
    })
}

/// SHA-256 of an image's quantization table and coefficients.
pub fn image_hash(img: &CoefficientImage) -> String {
    let mut h = Sha256::new();
    h.update((img.width() as u32).to_le_bytes());
    h.update((img.height() as u32).to_le_bytes());
    for q in img.quant_table().zigzag() {
        h.update(q.to_le_bytes());
    }
    for c in img.coeffs() {
        h.update(c.to_le_bytes());
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trains a fresh analyzer on `train_set` and scores it on `test_set`.
/// Any image shared between the splits is an error.
pub fn evaluate_security(train_set: &PairSet<'_>, test_set: &PairSet<'_>, hp: &TrainConfig) -> Result<SecurityReport> {
    let seen: HashSet<String> = train_set
        .covers
        .iter()
        .chain(train_set.stegos)
        .map(image_hash)
        .collect();
    if let Some(dup) = test_set
        .covers
        .iter()
        .chain(test_set.stegos)
        .map(image_hash)
        .find(|h| seen.contains(h))
    {
        return Err(Error::SplitOverlap(dup));
    }
    if test_set.is_empty() {
        return Err(Error::InvalidArgument("empty test split".into()));
    }
    let model = train(train_set, None, hp)?;
    Ok(SecurityReport {
        train_acc: model.metrics.train_accuracy,
        test_acc: accuracy(&model, test_set)?,
    })
}

pub fn rates_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("image_id,rate\n");
    for (id, r) in rows {
        let _ = writeln!(s, "{id},{r:.8}");
    }
    s
}

pub fn histogram_csv(counts: &[u64]) -> String {
    let mut s = String::from("frequency,count\n");
    for (k, c) in counts.iter().enumerate() {
        let _ = writeln!(s, "{k},{c}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityRow {
    pub run_id: String,
    pub iteration: usize,
    pub train_acc: f64,
    pub test_acc: f64,
}

pub fn security_csv(rows: &[SecurityRow]) -> String {
    let mut s = String::from("run_id,iteration,train_acc,test_acc\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", r.run_id, r.iteration, r.train_acc, r.test_acc);
    }
    s
}
