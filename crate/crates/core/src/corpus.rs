//! Procedural grayscale covers for experiments and tests.

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::jpegio::{compress_gray, CoefficientImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub count: usize,
    /// Side length in pixels; a multiple of 8.
    pub size: usize,
    pub quality: u8,
    pub seed: u64,
}

/// One image: a smooth gradient, a few soft-edged shapes, a sinusoidal
/// texture patch and mild sensor noise. Image `index` uses its own RNG stream.
pub fn synthetic_image(size: usize, seed: u64, index: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let s = size as f64;
    let base = rng.random_range(70.0..180.0);
    let (gx, gy) = (rng.random_range(-60.0..60.0) / s, rng.random_range(-60.0..60.0) / s);
    let shapes: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
                rng.random_range(s / 10.0..s / 3.0),
                rng.random_range(-70.0..70.0),
            )
        })
        .collect();
    let freq = rng.random_range(0.3..1.4);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let tex_amp = rng.random_range(4.0..18.0);
    let (tcx, tcy, tr) = (
        rng.random_range(0.0..s),
        rng.random_range(0.0..s),
        rng.random_range(s / 4.0..s / 1.5),
    );
    let noise = Normal::new(0.0, rng.random_range(1.0..4.0)).expect("positive sigma");

    GrayImage::from_fn(size as u32, size as u32, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let mut v = base + gx * x + gy * y;
        for &(cx, cy, r, amp) in &shapes {
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            v += amp / (1.0 + ((d - r) / 1.5).exp());
        }
        let t = (x * angle.cos() + y * angle.sin()) * freq;
        let fall = (-((x - tcx).powi(2) + (y - tcy).powi(2)) / (2.0 * tr * tr)).exp();
        v += tex_amp * fall * t.sin();
        v += noise.sample(&mut rng);
        image::Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}

/// `cfg.count` covers compressed at `cfg.quality`.
pub fn synthetic_covers(cfg: &CorpusConfig) -> Result<Vec<CoefficientImage>> {
    if cfg.size == 0 || cfg.size % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "corpus image size {} is not a positive multiple of 8",
            cfg.size
        )));
    }
    exec::try_map_range(cfg.count, |i| {
        compress_gray(&synthetic_image(cfg.size, cfg.seed, i as u64), cfg.quality)
    })
}
