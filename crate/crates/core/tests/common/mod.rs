//! Independent reference implementations used as test oracles.
//!
//! Everything here is written in the most direct form available: explicit
//! cosines instead of the library's basis table, per-pixel mirror loops,
//! full-image recomputation, exhaustive enumeration.

#![allow(dead_code)]

use std::f64::consts::PI;

use stegadv_core::analyzer::{AnalyzerModel, KERNELS};
use stegadv_core::corpus::{synthetic_covers, CorpusConfig};
use stegadv_core::{CoefficientImage, SpatialImage};

pub fn covers(count: usize, size: usize, quality: u8, seed: u64) -> Vec<CoefficientImage> {
    synthetic_covers(&CorpusConfig {
        count,
        size,
        quality,
        seed,
    })
    .unwrap()
}

/// `c_k(y)` of the orthonormal 8-point DCT-II.
pub fn dct_basis(k: usize, y: usize) -> f64 {
    let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
    a * ((2 * y + 1) as f64 * k as f64 * PI / 16.0).cos()
}

/// Dequantize and inverse-transform with explicit cosines, coefficients as reals.
pub fn decompress_real(img: &CoefficientImage, coeffs: &[f64]) -> Vec<f64> {
    let (w, h) = img.dims();
    let q = img.quant_table().natural();
    let mut out = vec![128.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (by, bx) = (y / 8 * 8, x / 8 * 8);
            let mut s = 0.0;
            for k in 0..8 {
                for l in 0..8 {
                    let c = coeffs[(by + k) * w + bx + l];
                    s += c * f64::from(q[k * 8 + l]) * dct_basis(k, y % 8) * dct_basis(l, x % 8);
                }
            }
            out[y * w + x] += s;
        }
    }
    out
}

/// Reflection with the edge sample repeated: `-1 → 0`, `n → n-1`.
pub fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

pub const DB8_HIGH: [f64; 16] = [
    -0.0544158422,
    0.3128715909,
    -0.6756307363,
    0.5853546837,
    0.0158291053,
    -0.2840155430,
    -0.0004724846,
    0.1287474266,
    0.0173693010,
    -0.0440882539,
    -0.0139810279,
    0.0087460940,
    0.0048703530,
    -0.0003917404,
    -0.0006754494,
    -0.0001174768,
];

pub fn db8_low() -> [f64; 16] {
    std::array::from_fn(|n| if n % 2 == 0 { DB8_HIGH[15 - n] } else { -DB8_HIGH[15 - n] })
}

/// `W(u, v) = Σ_a Σ_b fy(a) fx(b) X(reflect(u + 8 − a), reflect(v + 8 − b))`.
pub fn wavelet(x: &[f64], w: usize, h: usize, fy: &[f64; 16], fx: &[f64; 16]) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for u in 0..h {
        for v in 0..w {
            tmp[u * w + v] = (0..16)
                .map(|b| fx[b] * x[u * w + reflect(v as isize + 8 - b as isize, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for u in 0..h {
        for v in 0..w {
            out[u * w + v] = (0..16)
                .map(|a| fy[a] * tmp[reflect(u as isize + 8 - a as isize, h) * w + v])
                .sum();
        }
    }
    out
}

/// J-UNIWARD cost of a unit change at every coefficient: apply the change
/// in the pixel domain, recompute all three subbands over the whole image
/// and sum the relative differences.
pub fn brute_juniward(img: &CoefficientImage, sigma: f64) -> Vec<f64> {
    let (w, h) = img.dims();
    let coeffs: Vec<f64> = img.coeffs().iter().map(|&c| f64::from(c)).collect();
    let x = decompress_real(img, &coeffs);
    let lo = db8_low();
    let bands = [(lo, DB8_HIGH), (DB8_HIGH, lo), (DB8_HIGH, DB8_HIGH)];
    let base: Vec<Vec<f64>> = bands.iter().map(|(fy, fx)| wavelet(&x, w, h, fy, fx)).collect();
    let q = img.quant_table().natural();
    let mut cost = vec![0.0; w * h];
    for (i, c) in cost.iter_mut().enumerate() {
        let (y, xx) = (i / w, i % w);
        let (k, l) = (y % 8, xx % 8);
        let (by, bx) = (y / 8 * 8, xx / 8 * 8);
        let qv = f64::from(q[k * 8 + l]);
        let mut xp = x.clone();
        for r in 0..8 {
            for s in 0..8 {
                xp[(by + r) * w + bx + s] += qv * dct_basis(k, r) * dct_basis(l, s);
            }
        }
        for ((fy, fx), wb) in bands.iter().zip(&base) {
            let wp = wavelet(&xp, w, h, fy, fx);
            *c += wp
                .iter()
                .zip(wb)
                .map(|(a, b)| (a - b).abs() / (sigma + b.abs()))
                .sum::<f64>();
        }
    }
    cost
}

/// The analyzer's forward pass written out pixel by pixel.
pub fn straight_forward(model: &AnalyzerModel, img: &SpatialImage) -> (f64, f64) {
    straight_pass(model, img).0
}

/// Logits plus the sign pattern of every head pre-activation.
pub fn straight_pass(model: &AnalyzerModel, img: &SpatialImage) -> ((f64, f64), Vec<bool>) {
    let (w, h) = (img.width, img.height);
    let t = model.truncation();
    let at = |y: isize, x: isize| img.samples[reflect(y, h) * w + reflect(x, w)];
    let mut trunc = vec![vec![0.0; w * h]; KERNELS.len()];
    for (k, kern) in KERNELS.iter().enumerate() {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut r = 0.0;
                for a in 0..5isize {
                    for b in 0..5isize {
                        r += kern[(a * 5 + b) as usize] * at(y + a - 2, x + b - 2);
                    }
                }
                trunc[k][y as usize * w + x as usize] = t * (r / t).tanh();
            }
        }
    }
    let c_n = model.channels();
    let n = (w * h) as f64;
    let mut feats = vec![0.0; 2 * c_n];
    let mut active = Vec::with_capacity(c_n * w * h);
    for c in 0..c_n {
        let (mut s1, mut s2) = (0.0, 0.0);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut v = model.head_bias(c);
                for (k, plane) in trunc.iter().enumerate() {
                    for a in 0..3isize {
                        for b in 0..3isize {
                            let s = plane[reflect(y + a - 1, h) * w + reflect(x + b - 1, w)];
                            v += model.head_weight(c, k, (a * 3 + b) as usize) * s;
                        }
                    }
                }
                active.push(v > 0.0);
                let r = v.max(0.0);
                s1 += r;
                s2 += r * r;
            }
        }
        feats[c] = s1 / n;
        feats[c_n + c] = s2 / n;
    }
    let logit = |j: usize| {
        model.classifier_bias(j)
            + (0..2 * c_n)
                .map(|f| model.classifier_weight(j, f) * feats[f])
                .sum::<f64>()
    };
    ((logit(0), logit(1)), active)
}

/// Central difference of `logit_stego − logit_cover` along coefficient `i`,
/// and whether any ReLU switches between the two evaluation points.
pub fn central_difference(model: &AnalyzerModel, cover: &CoefficientImage, i: usize, step: f64) -> (f64, bool) {
    let (w, h) = cover.dims();
    let base: Vec<f64> = cover.coeffs().iter().map(|&c| f64::from(c)).collect();
    let eval = |delta: f64| {
        let mut c = base.clone();
        c[i] += delta;
        straight_pass(model, &SpatialImage::new(w, h, decompress_real(cover, &c)))
    };
    let (((c1, s1), p1), ((c0, s0), p0)) = (eval(step), eval(-step));
    (((s1 - c1) - (s0 - c0)) / (2.0 * step), p1 != p0)
}

/// Random parameters in every slot, including the classifier.
pub fn random_model(channels: usize, seed: u64) -> AnalyzerModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = AnalyzerModel::param_count(channels);
    let head = channels * KERNELS.len() * 9;
    let params = (0..n)
        .map(|i| {
            let scale = if i < head { 0.15 } else { 0.5 };
            rng.random_range(-scale..scale)
        })
        .collect();
    AnalyzerModel::from_params(channels, 4.0, params).unwrap()
}

/// Minimum flip cost over all `y` with syndrome `message`, by enumeration.
pub fn exhaustive_stc(
    cover_bits: &[u8],
    costs: &[f64],
    message: &[u8],
    hmat: &[Vec<u8>],
) -> Option<f64> {
    let n = hmat[0].len();
    let mut best: Option<f64> = None;
    for y in 0u32..(1 << n) {
        let ok = hmat.iter().zip(message).all(|(row, &m)| {
            let s = row
                .iter()
                .enumerate()
                .fold(0u8, |acc, (j, &hv)| acc ^ (hv & ((y >> j) as u8 & 1)));
            s == m
        });
        if !ok {
            continue;
        }
        let c: f64 = (0..n)
            .filter(|&j| (y >> j) as u8 & 1 != cover_bits[j])
            .map(|j| costs[j])
            .sum();
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    }
    best
}
