//! Orthonormal 8×8 DCT-II and its inverse, on natural (row-major) blocks.

use std::f64::consts::PI;
use std::sync::LazyLock;

/// `BASIS[u][x] = a(u) cos((2x+1)uπ/16)` with `a(0) = √(1/8)`, `a(u>0) = 1/2`.
pub(crate) static BASIS: LazyLock<[[f64; 8]; 8]> = LazyLock::new(|| {
    let mut m = [[0.0; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let a = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * (((2 * x + 1) as f64) * (u as f64) * PI / 16.0).cos();
        }
    }
    m
});

pub fn forward_dct(block: &[f64; 64]) -> [f64; 64] {
    let c = &*BASIS;
    // rows first: tmp[r][v] = Σ_c C[v][c] X[r][c]
    let mut tmp = [0.0; 64];
    for r in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                s += c[v][x] * block[r * 8 + x];
            }
            tmp[r * 8 + v] = s;
        }
    }
    let mut out = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for r in 0..8 {
                s += c[u][r] * tmp[r * 8 + v];
            }
            out[u * 8 + v] = s;
        }
    }
    out
}

pub fn inverse_dct(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = &*BASIS;
    let mut tmp = [0.0; 64];
    for u in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for v in 0..8 {
                s += c[v][x] * coeffs[u * 8 + v];
            }
            tmp[u * 8 + x] = s;
        }
    }
    let mut out = [0.0; 64];
    for r in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                s += c[u][r] * tmp[u * 8 + x];
            }
            out[r * 8 + x] = s;
        }
    }
    out
}
