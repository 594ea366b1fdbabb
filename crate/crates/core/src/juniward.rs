//! J-UNIWARD: symmetric JPEG embedding cost from relative changes of
//! undecimated Daubechies-8 directional wavelet coefficients.
//!
//! For a unit change of coefficient `(k, l)` in a block, the pixel change is
//! the separable basis `q · c_k(y) c_l(x)`. Each directional filter is itself
//! separable and mirror padding acts per axis, so the wavelet-domain change
//! factors as `q · A_k(u) · B_l(v)`. The cost
//! `Σ_s Σ_{u,v} |ΔW_s(u,v)| / (σ + |W_s(u,v)|)` is then two small
//! matrix products per block instead of a full recomputation per coefficient.

use crate::cost::{CostMap, WET_COST};
use crate::error::{Error, Result};
use crate::exec;
use crate::jpegio::{coeff_range, decompress, dct::BASIS, CoefficientImage, SpatialImage};

pub const DEFAULT_SIGMA: f64 = 1.0 / 64.0;

/// db8 high-pass decomposition filter.
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

pub const FILTER_LEN: usize = 16;
/// `W(u) = Σ_a f(a) · X(mirror(u + FILTER_ORIGIN − a))`.
pub const FILTER_ORIGIN: isize = 8;

/// Quadrature-mirror low-pass partner of [`DB8_HIGH`].
pub fn db8_low() -> [f64; 16] {
    let mut lp = [0.0; 16];
    for (n, v) in lp.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB8_HIGH[15 - n];
    }
    lp
}

/// The three directional subbands as (vertical filter, horizontal filter): LH, HL, HH.
pub fn subband_filters() -> [([f64; 16], [f64; 16]); 3] {
    let lo = db8_low();
    [(lo, DB8_HIGH), (DB8_HIGH, lo), (DB8_HIGH, DB8_HIGH)]
}

/// Edge-inclusive reflection of `i` into `[0, n)`.
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Source of an initial, symmetric embedding cost.
pub trait InitialCost: Sync {
    fn name(&self) -> &'static str;
    fn cost(&self, cover: &CoefficientImage) -> Result<CostMap>;
}

#[derive(Debug, Clone, Copy)]
pub struct Juniward {
    pub sigma: f64,
}

impl Default for Juniward {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl InitialCost for Juniward {
    fn name(&self) -> &'static str {
        "j-uniward"
    }

    fn cost(&self, cover: &CoefficientImage) -> Result<CostMap> {
        juniward_cost(cover, self.sigma)
    }
}

/// Separable mirror-padded filtering of a `w × h` image.
pub(crate) fn filter2d(img: &[f64], w: usize, h: usize, fy: &[f64; 16], fx: &[f64; 16]) -> Vec<f64> {
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let src = &img[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for (b, f) in fx.iter().enumerate() {
                s += f * src[mirror(x as isize + FILTER_ORIGIN - b as isize, w)];
            }
            rows[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (a, f) in fy.iter().enumerate() {
            let sy = mirror(y as isize + FILTER_ORIGIN - a as isize, h);
            let src = &rows[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += f * s;
            }
        }
    }
    out
}

/// 1-D response of `filter` to basis function `freq` placed at `start..start+8` of an axis of length `n`,
/// over outputs `lo..hi`. Returned as `hi - lo` values for each of the 8 frequencies.
fn axis_response(filter: &[f64; 16], start: usize, n: usize, lo: usize, hi: usize) -> [Vec<f64>; 8] {
    let basis = &*BASIS;
    std::array::from_fn(|freq| {
        (lo..hi)
            .map(|u| {
                let mut s = 0.0;
                for (a, f) in filter.iter().enumerate() {
                    let i = mirror(u as isize + FILTER_ORIGIN - a as isize, n);
                    if i >= start && i < start + 8 {
                        s += f * basis[freq][i - start];
                    }
                }
                s
            })
            .collect()
    })
}

/// Symmetric J-UNIWARD cost of every coefficient of `cover`.
pub fn juniward_cost(cover: &CoefficientImage, sigma: f64) -> Result<CostMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let (w, h) = cover.dims();
    let SpatialImage { samples, .. } = decompress(cover);
    let filters = subband_filters();
    // reciprocal weights 1 / (σ + |W_s|)
    let weights: Vec<Vec<f64>> = filters
        .iter()
        .map(|(fy, fx)| {
            filter2d(&samples, w, h, fy, fx)
                .into_iter()
                .map(|v| 1.0 / (sigma + v.abs()))
                .collect()
        })
        .collect();
    let q = cover.quant_table().natural();
    let (bw, bh) = (cover.blocks_wide(), cover.blocks_tall());

    let blocks = exec::map_range(bw * bh, |b| {
        let (by, bx) = (b / bw, b % bw);
        let (r0, c0) = (by * 8, bx * 8);
        let (ulo, uhi) = (r0.saturating_sub(8), (r0 + 15).min(h));
        let (vlo, vhi) = (c0.saturating_sub(8), (c0 + 15).min(w));
        let mut out = [0.0f64; 64];
        for ((fy, fx), wt) in filters.iter().zip(&weights) {
            let a = axis_response(fy, r0, h, ulo, uhi);
            let bvec = axis_response(fx, c0, w, vlo, vhi);
            // m[l][u] = Σ_v |B_l(v)| · wt(u, v)
            let mut m = vec![[0.0f64; 8]; uhi - ulo];
            for (ui, u) in (ulo..uhi).enumerate() {
                let row = &wt[u * w + vlo..u * w + vhi];
                for l in 0..8 {
                    m[ui][l] = bvec[l].iter().zip(row).map(|(b, r)| b.abs() * r).sum();
                }
            }
            for k in 0..8 {
                for l in 0..8 {
                    let s: f64 = a[k].iter().zip(&m).map(|(av, mr)| av.abs() * mr[l]).sum();
                    out[k * 8 + l] += s;
                }
            }
        }
        for k in 0..64 {
            out[k] *= f64::from(q[k]);
        }
        out
    });

    let mut plus = vec![0.0; w * h];
    let mut minus = vec![0.0; w * h];
    let coeffs = cover.coeffs();
    for (b, costs) in blocks.iter().enumerate() {
        let (by, bx) = (b / bw, b % bw);
        for k in 0..8 {
            for l in 0..8 {
                let (y, x) = (by * 8 + k, bx * 8 + l);
                let i = y * w + x;
                let rho = costs[k * 8 + l].min(WET_COST);
                let (lo, hi) = coeff_range(y, x);
                plus[i] = if coeffs[i] >= hi { WET_COST } else { rho };
                minus[i] = if coeffs[i] <= lo { WET_COST } else { rho };
            }
        }
    }
    CostMap::new(w, h, plus, minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpegio::QuantTable;

    #[test]
    fn mirror_is_edge_inclusive() {
        assert_eq!(mirror(-1, 8), 0);
        assert_eq!(mirror(-8, 8), 7);
        assert_eq!(mirror(8, 8), 7);
        assert_eq!(mirror(15, 8), 0);
        assert_eq!(mirror(3, 8), 3);
    }

    #[test]
    fn qmf_pair_is_orthogonal() {
        let lo = db8_low();
        let dot: f64 = lo.iter().zip(DB8_HIGH.iter()).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
        let e: f64 = lo.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-8);
    }

    #[test]
    fn boundary_values_are_wet_one_way() {
        let q = QuantTable::ijg(100).unwrap();
        let mut c = vec![0i16; 64];
        c[1] = 1023;
        c[2] = -1023;
        c[0] = -1024;
        let img = CoefficientImage::new(8, 8, c, q, None).unwrap();
        let cost = juniward_cost(&img, DEFAULT_SIGMA).unwrap();
        assert!(cost.is_wet_plus(1) && !cost.is_wet_minus(1));
        assert!(cost.is_wet_minus(2) && !cost.is_wet_plus(2));
        assert!(cost.is_wet_minus(0) && !cost.is_wet_plus(0));
        assert!(!cost.is_wet(3));
    }

    #[test]
    fn rejects_bad_sigma() {
        let img = CoefficientImage::zeros(8, 8, QuantTable::ijg(75).unwrap()).unwrap();
        assert!(juniward_cost(&img, 0.0).is_err());
        assert!(juniward_cost(&img, -1.0).is_err());
    }
}
