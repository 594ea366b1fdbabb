//! Baseline grayscale JPEG at the quantized-coefficient level.
//!
//! Coefficients are kept in "plane" layout: a `height × width` grid where
//! the value at `(y, x)` is coefficient `(y % 8, x % 8)` of block
//! `(y / 8, x / 8)`. Cost, gradient, change and mask grids share this
//! layout, so one flat index addresses the same embedding unit everywhere.

pub mod container;
pub mod dct;
mod decode;
mod encode;
mod huffman;
pub mod pgm;
mod quant;

use image::GrayImage;

pub use decode::decode_jpeg;
pub use encode::encode_jpeg;
pub use quant::{ijg_scale, QuantTable, BASE_LUMINANCE, ZIGZAG};

use crate::error::{Error, Result};

/// Representable range of a DC coefficient.
pub const DC_RANGE: (i16, i16) = (-1024, 1023);
/// Representable range of an AC coefficient; baseline Huffman coding stops at magnitude category 10.
pub const AC_RANGE: (i16, i16) = (-1023, 1023);

/// Representable range for the coefficient at plane position `(y, x)`.
pub fn coeff_range(y: usize, x: usize) -> (i16, i16) {
    if y % 8 == 0 && x % 8 == 0 {
        DC_RANGE
    } else {
        AC_RANGE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientImage {
    width: usize,
    height: usize,
    coeffs: Vec<i16>,
    quant: QuantTable,
    quality: Option<u8>,
}

impl CoefficientImage {
    pub fn new(
        width: usize,
        height: usize,
        coeffs: Vec<i16>,
        quant: QuantTable,
        quality: Option<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || width % 8 != 0 || height % 8 != 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions {width}x{height} are not positive multiples of 8"
            )));
        }
        if coeffs.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a {width}x{height} grid",
                coeffs.len()
            )));
        }
        if let Some(q) = quality {
            if !(1..=100).contains(&q) {
                return Err(Error::InvalidArgument(format!("quality factor {q}")));
            }
        }
        for (i, &c) in coeffs.iter().enumerate() {
            let (lo, hi) = coeff_range(i / width, i % width);
            if c < lo || c > hi {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {c} at ({}, {}) outside [{lo}, {hi}]",
                    i / width,
                    i % width
                )));
            }
        }
        Ok(Self {
            width,
            height,
            coeffs,
            quant,
            quality,
        })
    }

    pub fn zeros(width: usize, height: usize, quant: QuantTable) -> Result<Self> {
        Self::new(width, height, vec![0; width * height], quant, None)
    }

    /// Same table and metadata, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<i16>) -> Result<Self> {
        Self::new(self.width, self.height, coeffs, self.quant, self.quality)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[i16] {
        &self.coeffs
    }

    pub fn quant_table(&self) -> &QuantTable {
        &self.quant
    }

    pub fn quality(&self) -> Option<u8> {
        self.quality
    }

    pub fn blocks_wide(&self) -> usize {
        self.width / 8
    }

    pub fn blocks_tall(&self) -> usize {
        self.height / 8
    }

    /// Block `(by, bx)` in natural order.
    pub fn block(&self, by: usize, bx: usize) -> [i16; 64] {
        let mut out = [0i16; 64];
        for u in 0..8 {
            let row = (by * 8 + u) * self.width + bx * 8;
            out[u * 8..u * 8 + 8].copy_from_slice(&self.coeffs[row..row + 8]);
        }
        out
    }

    /// Quantization step applying to flat plane index `idx`.
    pub fn step_at(&self, idx: usize) -> u16 {
        self.quant.step((idx / self.width) % 8, (idx % self.width) % 8)
    }
}

/// Decompressed luminance, not rounded and not clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<f64>,
}

impl SpatialImage {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Self {
        assert_eq!(samples.len(), width * height);
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height])
    }
}

/// Dequantize, inverse DCT and add 128, block by block.
pub fn decompress(img: &CoefficientImage) -> SpatialImage {
    let (w, h) = img.dims();
    let q = img.quant_table().natural();
    let mut samples = vec![0.0; w * h];
    for by in 0..img.blocks_tall() {
        for bx in 0..img.blocks_wide() {
            let blk = img.block(by, bx);
            let mut deq = [0.0; 64];
            for k in 0..64 {
                deq[k] = f64::from(blk[k]) * f64::from(q[k]);
            }
            let px = dct::inverse_dct(&deq);
            for r in 0..8 {
                let row = (by * 8 + r) * w + bx * 8;
                for c in 0..8 {
                    samples[row + c] = px[r * 8 + c] + 128.0;
                }
            }
        }
    }
    SpatialImage::new(w, h, samples)
}

/// Compress an 8-bit grayscale image at quality `qf`.
///
/// Images whose sides are not multiples of 8 are padded by edge replication.
pub fn compress_gray(gray: &GrayImage, qf: u8) -> Result<CoefficientImage> {
    let quant = QuantTable::ijg(qf)?;
    let (sw, sh) = (gray.width() as usize, gray.height() as usize);
    if sw == 0 || sh == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let w = sw.div_ceil(8) * 8;
    let h = sh.div_ceil(8) * 8;
    if (w, h) != (sw, sh) {
        log::warn!("padding {sw}x{sh} image to {w}x{h} by edge replication");
    }
    let raw = gray.as_raw();
    let pixel = |y: usize, x: usize| f64::from(raw[y.min(sh - 1) * sw + x.min(sw - 1)]);
    let qn = quant.natural();
    let mut coeffs = vec![0i16; w * h];
    for by in 0..h / 8 {
        for bx in 0..w / 8 {
            let mut blk = [0.0; 64];
            for r in 0..8 {
                for c in 0..8 {
                    blk[r * 8 + c] = pixel(by * 8 + r, bx * 8 + c) - 128.0;
                }
            }
            let f = dct::forward_dct(&blk);
            for u in 0..8 {
                for v in 0..8 {
                    let (lo, hi) = coeff_range(u, v);
                    // f64::round is half-away-from-zero
                    let c = (f[u * 8 + v] / f64::from(qn[u * 8 + v])).round();
                    coeffs[(by * 8 + u) * w + bx * 8 + v] =
                        c.clamp(f64::from(lo), f64::from(hi)) as i16;
                }
            }
        }
    }
    CoefficientImage::new(w, h, coeffs, quant, Some(qf))
}

/// Number of nonzero AC coefficients.
pub fn count_nzac(img: &CoefficientImage) -> usize {
    let w = img.width();
    img.coeffs()
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c != 0 && !((i / w) % 8 == 0 && (i % w) % 8 == 0))
        .count()
}
