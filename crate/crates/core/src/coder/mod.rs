//! From costs to changes: payload-limited simulation and syndrome-trellis coding.

mod lambda;
mod simulate;
pub mod stc;

pub use lambda::{capacity_bits, change_probabilities, solve_lambda, ternary_entropy_bits, total_entropy_bits};
pub use simulate::simulate_embedding;
pub use stc::{stc_embed, stc_extract, DEFAULT_STC_HEIGHT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jpegio::{coeff_range, CoefficientImage};

/// Ternary modification pattern in plane layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeMap {
    pub width: usize,
    pub height: usize,
    pub changes: Vec<i8>,
    /// Expected bits (simulation) or embedded bits (STC).
    pub realized_bits: f64,
}

impl ChangeMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            changes: vec![0; width * height],
            realized_bits: 0.0,
        }
    }

    pub fn count_changed(&self) -> usize {
        self.changes.iter().filter(|&&c| c != 0).count()
    }

    pub fn negated(&self) -> Self {
        Self {
            changes: self.changes.iter().map(|&c| -c).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    #[default]
    Simulate,
    Stc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub payload_bpnz: f64,
    pub seed: u64,
    pub mode: EmbedMode,
}

impl EmbedRequest {
    pub fn new(payload_bpnz: f64, seed: u64, mode: EmbedMode) -> Result<Self> {
        let max = 3f64.log2();
        if !(payload_bpnz > 0.0 && payload_bpnz <= max) {
            return Err(Error::InvalidArgument(format!(
                "payload {payload_bpnz} bpnz outside (0, log2 3]"
            )));
        }
        Ok(Self {
            payload_bpnz,
            seed,
            mode,
        })
    }

    pub fn simulate(payload_bpnz: f64, seed: u64) -> Result<Self> {
        Self::new(payload_bpnz, seed, EmbedMode::Simulate)
    }
}

/// Coefficient-wise `cover + changes`; fails if a result leaves the representable range.
pub fn apply_changes(cover: &CoefficientImage, changes: &ChangeMap) -> Result<CoefficientImage> {
    if changes.changes.len() != cover.len() || changes.width != cover.width() {
        return Err(Error::shape(cover.dims(), (changes.width, changes.height)));
    }
    let w = cover.width();
    let mut out = Vec::with_capacity(cover.len());
    for (i, (&c, &d)) in cover.coeffs().iter().zip(&changes.changes).enumerate() {
        if !(-1..=1).contains(&d) {
            return Err(Error::InvalidArgument(format!("change {d} at index {i}")));
        }
        let v = c + i16::from(d);
        let (lo, hi) = coeff_range(i / w, i % w);
        if v < lo || v > hi {
            return Err(Error::InvalidArgument(format!(
                "change at index {i} moves coefficient {c} out of [{lo}, {hi}]"
            )));
        }
        out.push(v);
    }
    cover.with_coeffs(out)
}
