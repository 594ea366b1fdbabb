
use crate::error::{Error, Result};

/// `ZIGZAG[k]` is the natural (row-major) index of the k-th coefficient in zig-zag order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// IJG base luminance table, natural order.
pub const BASE_LUMINANCE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// A luminance quantization table, stored in zig-zag order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantTable([u16; 64]);

impl QuantTable {
    pub fn from_zigzag(values: [u16; 64]) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v == 0 || v > 255) {
            return Err(Error::InvalidArgument(format!(
                "quantization step {v} outside [1, 255]"
            )));
        }
        Ok(QuantTable(values))
    }

    pub fn from_natural(values: [u16; 64]) -> Result<Self> {
        let mut zz = [0u16; 64];
        for (k, &n) in ZIGZAG.iter().enumerate() {
            zz[k] = values[n];
        }
        Self::from_zigzag(zz)
    }

    /// IJG-scaled base luminance table for quality `qf` in `[1, 100]`.
    pub fn ijg(qf: u8) -> Result<Self> {
        if !(1..=100).contains(&qf) {
            return Err(Error::InvalidArgument(format!(
                "quality factor {qf} outside [1, 100]"
            )));
        }
        let scale = ijg_scale(qf);
        let mut natural = [0u16; 64];
        for (dst, &base) in natural.iter_mut().zip(BASE_LUMINANCE.iter()) {
            let q = (u32::from(base) * scale + 50) / 100;
            *dst = q.clamp(1, 255) as u16;
        }
        Self::from_natural(natural)
    }

    /// The IJG quality factor that reproduces this table exactly, if any.
    pub fn ijg_quality(&self) -> Option<u8> {
        (1..=100u8).rev().find(|&qf| Self::ijg(qf).is_ok_and(|t| t == *self))
    }

    pub fn zigzag(&self) -> &[u16; 64] {
        &self.0
    }

    pub fn natural(&self) -> [u16; 64] {
        let mut out = [0u16; 64];
        for (k, &n) in ZIGZAG.iter().enumerate() {
            out[n] = self.0[k];
        }
        out
    }

    /// Step for frequency row `u`, column `v`.
    pub fn step(&self, u: usize, v: usize) -> u16 {
        self.natural()[u * 8 + v]
    }
}

pub fn ijg_scale(qf: u8) -> u32 {
    let qf = u32::from(qf);
    if qf < 50 {
        5000 / qf
    } else {
        200 - 2 * qf
    }
}
