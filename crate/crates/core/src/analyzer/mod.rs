//! The differentiable steganalyzer.
//!
//! Pipeline: fixed high-pass bank (mirror padding) → `T·tanh(x/T)` →
//! trainable 3×3 convolution with bias (mirror padding) → ReLU → per-channel
//! global mean and mean of squares → linear layer → (cover, stego) logits.
//!
//! Back-propagation is written out by hand, both to the trainable
//! parameters and to the input pixels, and from pixels to quantized DCT
//! coefficients through the (unrounded) decompression.

pub mod kernels;
pub mod oracle;
pub mod persist;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use kernels::{kernel_checksum, KERNELS, KERNEL_COUNT};
pub use train::{accuracy, train, PairSet, TrainConfig};

use crate::error::{Error, Result};
use crate::jpegio::{dct, decompress, CoefficientImage, SpatialImage};
use crate::juniward::mirror;
use kernels::{KERNEL_RADIUS, KERNEL_SIZE};

pub const DEFAULT_CHANNELS: usize = 16;
pub const DEFAULT_TRUNCATION: f64 = 4.0;
const HEAD_TAPS: usize = 9;

/// Per-coefficient gradient of the detector scalar, in plane layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub grads: Vec<f64>,
}

impl GradientMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            grads: vec![0.0; width * height],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

/// Trainable state of one steganalyzer. The kernel bank is the static [`KERNELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerModel {
    channels: usize,
    truncation: f64,
    /// Head weights `[c][k][3×3]`, head biases `[c]`, classifier `[2][2C]`, classifier biases `[2]`.
    params: Vec<f64>,
    pub seed: u64,
    pub metrics: TrainMetrics,
}

impl AnalyzerModel {
    pub fn param_count(channels: usize) -> usize {
        channels * KERNEL_COUNT * HEAD_TAPS + channels + 2 * 2 * channels + 2
    }

    /// All-zero parameters.
    pub fn zeros(channels: usize, truncation: f64) -> Self {
        Self {
            channels,
            truncation,
            params: vec![0.0; Self::param_count(channels)],
            seed: 0,
            metrics: TrainMetrics::default(),
        }
    }

    /// He-style normal head weights, zero biases and classifier.
    pub fn init(channels: usize, truncation: f64, seed: u64) -> Self {
        let mut m = Self::zeros(channels, truncation);
        m.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = (2.0 / (KERNEL_COUNT * HEAD_TAPS) as f64).sqrt() / DEFAULT_TRUNCATION;
        let normal = Normal::new(0.0, std).expect("valid std");
        let n = channels * KERNEL_COUNT * HEAD_TAPS;
        for p in &mut m.params[..n] {
            *p = normal.sample(&mut rng);
        }
        m
    }

    pub fn from_params(channels: usize, truncation: f64, params: Vec<f64>) -> Result<Self> {
        if params.len() != Self::param_count(channels) {
            return Err(Error::Model(format!(
                "{} parameters for {channels} channels",
                params.len()
            )));
        }
        if truncation.is_nan() || truncation <= 0.0 || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Model("non-finite or invalid parameters".into()));
        }
        Ok(Self {
            channels,
            truncation,
            params,
            seed: 0,
            metrics: TrainMetrics::default(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let c = self.channels;
        let hb = c * KERNEL_COUNT * HEAD_TAPS;
        let cw = hb + c;
        let cb = cw + 4 * c;
        (hb, cw, cb)
    }

    pub fn head_weight(&self, c: usize, k: usize, tap: usize) -> f64 {
        self.params[(c * KERNEL_COUNT + k) * HEAD_TAPS + tap]
    }

    pub fn head_bias(&self, c: usize) -> f64 {
        self.params[self.offsets().0 + c]
    }

    /// Classifier weight for output `j` (0 cover, 1 stego) and feature `f`.
    pub fn classifier_weight(&self, j: usize, f: usize) -> f64 {
        self.params[self.offsets().1 + j * 2 * self.channels + f]
    }

    pub fn classifier_bias(&self, j: usize) -> f64 {
        self.params[self.offsets().2 + j]
    }

    /// Exchanges the cover and stego rows of the classifier.
    pub fn swap_classes(&mut self) {
        let (_, cw, cb) = self.offsets();
        let f = 2 * self.channels;
        for i in 0..f {
            self.params.swap(cw + i, cw + f + i);
        }
        self.params.swap(cb, cb + 1);
    }

    pub fn checksum(&self) -> String {
        persist::payload_checksum(&self.params)
    }
}

/// Fixed front-end output for one image: tanh values and the mirror-padded truncated residuals.
pub(crate) struct FrontEnd {
    pub w: usize,
    pub h: usize,
    /// `tanh(R/T)`, `K × N`.
    pub tanh: Vec<f64>,
    /// `T·tanh(R/T)` padded by one pixel on each side, `K × (H+2)(W+2)`.
    pub spad: Vec<f64>,
}

impl FrontEnd {
    pub fn compute(img: &SpatialImage, truncation: f64) -> Result<Self> {
        let (w, h) = (img.width, img.height);
        if w < KERNEL_SIZE || h < KERNEL_SIZE {
            return Err(Error::InvalidArgument(format!(
                "image {w}x{h} smaller than the {KERNEL_SIZE}x{KERNEL_SIZE} kernel support"
            )));
        }
        if img.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite input samples".into()));
        }
        let r = KERNEL_RADIUS;
        let (xw, xh) = (w + 2 * r, h + 2 * r);
        let mut xp = vec![0.0; xw * xh];
        for py in 0..xh {
            let sy = mirror(py as isize - r as isize, h);
            for px in 0..xw {
                xp[py * xw + px] = img.samples[sy * w + mirror(px as isize - r as isize, w)];
            }
        }
        let n = w * h;
        let (pw, ph) = (w + 2, h + 2);
        let mut tanh = vec![0.0; KERNEL_COUNT * n];
        let mut spad = vec![0.0; KERNEL_COUNT * pw * ph];
        let mut resp = vec![0.0; n];
        for (k, kern) in KERNELS.iter().enumerate() {
            resp.fill(0.0);
            for a in 0..KERNEL_SIZE {
                for b in 0..KERNEL_SIZE {
                    let kv = kern[a * KERNEL_SIZE + b];
                    if kv == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let src = &xp[(y + a) * xw + b..(y + a) * xw + b + w];
                        for (d, s) in resp[y * w..(y + 1) * w].iter_mut().zip(src) {
                            *d += kv * s;
                        }
                    }
                }
            }
            let t = &mut tanh[k * n..(k + 1) * n];
            for (tv, rv) in t.iter_mut().zip(&resp) {
                *tv = (rv / truncation).tanh();
            }
            let sp = &mut spad[k * pw * ph..(k + 1) * pw * ph];
            for py in 0..ph {
                let sy = mirror(py as isize - 1, h);
                for px in 0..pw {
                    sp[py * pw + px] = truncation * t[sy * w + mirror(px as isize - 1, w)];
                }
            }
        }
        Ok(Self { w, h, tanh, spad })
    }
}

/// Head activations kept for back-propagation.
pub(crate) struct HeadPass {
    /// Pre-activation `H`, `C × N`.
    pub pre: Vec<f64>,
    pub features: Vec<f64>,
    pub logits: [f64; 2],
}

pub(crate) fn head_forward(model: &AnalyzerModel, fe: &FrontEnd) -> HeadPass {
    let (w, h, c_n) = (fe.w, fe.h, model.channels);
    let n = w * h;
    let pw = w + 2;
    let plane = pw * (h + 2);
    let mut pre = vec![0.0; c_n * n];
    let mut features = vec![0.0; 2 * c_n];
    for c in 0..c_n {
        let hc = &mut pre[c * n..(c + 1) * n];
        hc.fill(model.head_bias(c));
        for k in 0..KERNEL_COUNT {
            let sp = &fe.spad[k * plane..(k + 1) * plane];
            for a in 0..3 {
                for b in 0..3 {
                    let wv = model.head_weight(c, k, a * 3 + b);
                    for y in 0..h {
                        let src = &sp[(y + a) * pw + b..(y + a) * pw + b + w];
                        for (d, s) in hc[y * w..(y + 1) * w].iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for &v in hc.iter() {
            if v > 0.0 {
                s1 += v;
                s2 += v * v;
            }
        }
        features[c] = s1 / n as f64;
        features[c_n + c] = s2 / n as f64;
    }
    let mut logits = [0.0; 2];
    for (j, l) in logits.iter_mut().enumerate() {
        *l = model.classifier_bias(j)
            + features
                .iter()
                .enumerate()
                .map(|(f, v)| model.classifier_weight(j, f) * v)
                .sum::<f64>();
    }
    HeadPass {
        pre,
        features,
        logits,
    }
}

/// Back-propagates `dlogits` through the head.
///
/// Returns the parameter gradient and, when requested, the gradient with
/// respect to the unpadded truncated residuals `S` (`K × N`).
pub(crate) fn head_backward(
    model: &AnalyzerModel,
    fe: &FrontEnd,
    pass: &HeadPass,
    dlogits: [f64; 2],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (w, h, c_n) = (fe.w, fe.h, model.channels);
    let n = w * h;
    let pw = w + 2;
    let plane = pw * (h + 2);
    let (hb, cw, cb) = model.offsets();
    let mut grad = vec![0.0; model.params.len()];

    let nf = 2 * c_n;
    let mut dfeat = vec![0.0; nf];
    for j in 0..2 {
        grad[cb + j] = dlogits[j];
        for f in 0..nf {
            grad[cw + j * nf + f] = dlogits[j] * pass.features[f];
            dfeat[f] += dlogits[j] * model.classifier_weight(j, f);
        }
    }

    let mut dspad = if want_input {
        Some(vec![0.0; KERNEL_COUNT * plane])
    } else {
        None
    };
    let mut g = vec![0.0; n];
    for c in 0..c_n {
        let hc = &pass.pre[c * n..(c + 1) * n];
        let (d1, d2) = (dfeat[c] / n as f64, 2.0 * dfeat[c_n + c] / n as f64);
        let mut any = false;
        for (gv, &v) in g.iter_mut().zip(hc) {
            *gv = if v > 0.0 {
                any = true;
                d1 + d2 * v
            } else {
                0.0
            };
        }
        if !any {
            continue;
        }
        grad[hb + c] = g.iter().sum();
        for k in 0..KERNEL_COUNT {
            let sp = &fe.spad[k * plane..(k + 1) * plane];
            for a in 0..3 {
                for b in 0..3 {
                    let mut s = 0.0;
                    for y in 0..h {
                        let src = &sp[(y + a) * pw + b..(y + a) * pw + b + w];
                        s += g[y * w..(y + 1) * w]
                            .iter()
                            .zip(src)
                            .map(|(x, y)| x * y)
                            .sum::<f64>();
                    }
                    grad[(c * KERNEL_COUNT + k) * HEAD_TAPS + a * 3 + b] = s;
                    if let Some(ds) = dspad.as_mut() {
                        let wv = model.head_weight(c, k, a * 3 + b);
                        let dp = &mut ds[k * plane..(k + 1) * plane];
                        for y in 0..h {
                            let dst = &mut dp[(y + a) * pw + b..(y + a) * pw + b + w];
                            for (d, gv) in dst.iter_mut().zip(&g[y * w..(y + 1) * w]) {
                                *d += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }

    let ds = dspad.map(|dp| {
        let mut out = vec![0.0; KERNEL_COUNT * n];
        for k in 0..KERNEL_COUNT {
            let src = &dp[k * plane..(k + 1) * plane];
            let dst = &mut out[k * n..(k + 1) * n];
            for py in 0..h + 2 {
                let sy = mirror(py as isize - 1, h);
                for px in 0..pw {
                    dst[sy * w + mirror(px as isize - 1, w)] += src[py * pw + px];
                }
            }
        }
        out
    });
    (grad, ds)
}

/// Pixel gradient from the gradient with respect to `S`.
pub(crate) fn frontend_backward(fe: &FrontEnd, ds: &[f64]) -> Vec<f64> {
    let (w, h) = (fe.w, fe.h);
    let n = w * h;
    let r = KERNEL_RADIUS;
    let (xw, xh) = (w + 2 * r, h + 2 * r);
    let mut dxp = vec![0.0; xw * xh];
    let mut dr = vec![0.0; n];
    for (k, kern) in KERNELS.iter().enumerate() {
        let t = &fe.tanh[k * n..(k + 1) * n];
        for ((d, s), tv) in dr.iter_mut().zip(&ds[k * n..(k + 1) * n]).zip(t) {
            *d = s * (1.0 - tv * tv);
        }
        for a in 0..KERNEL_SIZE {
            for b in 0..KERNEL_SIZE {
                let kv = kern[a * KERNEL_SIZE + b];
                if kv == 0.0 {
                    continue;
                }
                for y in 0..h {
                    let dst = &mut dxp[(y + a) * xw + b..(y + a) * xw + b + w];
                    for (d, g) in dst.iter_mut().zip(&dr[y * w..(y + 1) * w]) {
                        *d += kv * g;
                    }
                }
            }
        }
    }
    let mut dx = vec![0.0; n];
    for py in 0..xh {
        let sy = mirror(py as isize - r as isize, h);
        for px in 0..xw {
            dx[sy * w + mirror(px as isize - r as isize, w)] += dxp[py * xw + px];
        }
    }
    dx
}

/// `(logit_cover, logit_stego)` for a decompressed image.
pub fn forward(model: &AnalyzerModel, img: &SpatialImage) -> Result<(f64, f64)> {
    let fe = FrontEnd::compute(img, model.truncation)?;
    let pass = head_forward(model, &fe);
    Ok((pass.logits[0], pass.logits[1]))
}

/// `∂J/∂pixel` for `J = logit_stego − logit_cover`.
pub fn pixel_gradient(model: &AnalyzerModel, img: &SpatialImage) -> Result<Vec<f64>> {
    let fe = FrontEnd::compute(img, model.truncation)?;
    let pass = head_forward(model, &fe);
    let (_, ds) = head_backward(model, &fe, &pass, [-1.0, 1.0], true);
    Ok(frontend_backward(&fe, &ds.expect("input gradient requested")))
}

/// `∂J/∂coefficient` for `J = logit_stego − logit_cover` at the cover.
///
/// Per block, `G(u, v) = q(u, v) · DCT(pixel gradient)(u, v)`: the adjoint of
/// dequantize-then-orthonormal-IDCT.
pub fn coefficient_gradient(model: &AnalyzerModel, cover: &CoefficientImage) -> Result<GradientMap> {
    let px = pixel_gradient(model, &decompress(cover))?;
    Ok(pixel_to_coefficient_gradient(cover, &px))
}

pub fn pixel_to_coefficient_gradient(cover: &CoefficientImage, px: &[f64]) -> GradientMap {
    let (w, h) = cover.dims();
    let q = cover.quant_table().natural();
    let mut grads = vec![0.0; w * h];
    for by in 0..cover.blocks_tall() {
        for bx in 0..cover.blocks_wide() {
            let mut blk = [0.0; 64];
            for r in 0..8 {
                let row = (by * 8 + r) * w + bx * 8;
                blk[r * 8..r * 8 + 8].copy_from_slice(&px[row..row + 8]);
            }
            let f = dct::forward_dct(&blk);
            for u in 0..8 {
                for v in 0..8 {
                    grads[(by * 8 + u) * w + bx * 8 + v] = f64::from(q[u * 8 + v]) * f[u * 8 + v];
                }
            }
        }
    }
    GradientMap {
        width: w,
        height: h,
        grads,
    }
}
