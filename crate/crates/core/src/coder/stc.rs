//! Single-layer binary syndrome-trellis coding over coefficient LSBs.
//!
//! The parity-check matrix is built from an `h × w` submatrix placed along
//! the diagonal, one copy per message bit, with `w = ⌊n / m⌋` and rows past
//! `m` truncated. Trellis state bit `r` holds the partial syndrome of row
//! `i + r` while message bit `i` is being processed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{apply_changes, ChangeMap};
use crate::cost::CostMap;
use crate::error::{Error, Result};
use crate::jpegio::CoefficientImage;

pub const DEFAULT_STC_HEIGHT: usize = 10;
/// Messages may use at most this fraction of the coefficients.
pub const MAX_RATE: f64 = 0.9;
const SUBMATRIX_SEED: u64 = 0x5354_435f_4d41_5452;

/// Columns of the `h × w` submatrix; bit `r` of a column is row `r`.
/// The first and last rows are all ones.
pub fn submatrix(h: usize, w: usize) -> Vec<u32> {
    assert!((1..=20).contains(&h), "constraint height {h} outside 1..=20");
    let mut rng = ChaCha8Rng::seed_from_u64(SUBMATRIX_SEED ^ ((h as u64) << 32) ^ w as u64);
    let mask = (1u32 << h) - 1;
    (0..w)
        .map(|_| (rng.random::<u32>() & mask) | 1 | (1 << (h - 1)))
        .collect()
}

/// Explicit `m × (m·w)` parity-check matrix, row-major, for verification.
pub fn parity_check_matrix(m: usize, w: usize, h: usize) -> Vec<Vec<u8>> {
    let cols = submatrix(h, w);
    let mut hm = vec![vec![0u8; m * w]; m];
    for i in 0..m {
        for (j, &col) in cols.iter().enumerate() {
            for r in 0..h {
                if i + r < m && (col >> r) & 1 == 1 {
                    hm[i + r][i * w + j] = 1;
                }
            }
        }
    }
    hm
}

/// Minimum-cost `y` with `H·y = message`, and its cost.
///
/// `flip_costs[i]` is the cost of `y[i] ≠ cover_bits[i]`; infinite costs are forbidden flips.
/// Uses the first `message.len() · w` positions with `w = ⌊n / m⌋`.
pub fn embed_bits(
    cover_bits: &[u8],
    flip_costs: &[f64],
    message: &[u8],
    h: usize,
) -> Result<(Vec<u8>, f64)> {
    let n = cover_bits.len();
    let m = message.len();
    if m == 0 {
        return Ok((cover_bits.to_vec(), 0.0));
    }
    if m > n {
        return Err(Error::MessageTooLong { bits: m, limit: n });
    }
    let w = n / m;
    let used = m * w;
    let cols = submatrix(h, w);
    let states = 1usize << h;
    let words = states.div_ceil(64);
    let mut path = vec![0u64; used * words];
    let mut wght = vec![f64::INFINITY; states];
    let mut next = vec![f64::INFINITY; states];
    wght[0] = 0.0;

    let mut idx = 0;
    for &bit in message {
        for &col in &cols {
            let col = col as usize;
            let c = flip_costs[idx];
            let (c0, c1) = if cover_bits[idx] & 1 == 0 { (0.0, c) } else { (c, 0.0) };
            let row = &mut path[idx * words..(idx + 1) * words];
            for k in 0..states {
                let w0 = wght[k] + c0;
                let w1 = wght[k ^ col] + c1;
                if w1 < w0 {
                    next[k] = w1;
                    row[k / 64] |= 1 << (k % 64);
                } else {
                    next[k] = w0;
                }
            }
            std::mem::swap(&mut wght, &mut next);
            idx += 1;
        }
        let b = usize::from(bit & 1);
        for j in 0..states / 2 {
            wght[j] = wght[2 * j + b];
        }
        wght[states / 2..].fill(f64::INFINITY);
    }

    let (mut state, cost) = wght
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    if !cost.is_finite() {
        return Err(Error::WetColumn);
    }
    let mut y = cover_bits.to_vec();
    for i in (0..m).rev() {
        state = (state << 1) | usize::from(message[i] & 1);
        for j in (0..w).rev() {
            idx -= 1;
            let bit = (path[idx * words + state / 64] >> (state % 64)) & 1;
            y[idx] = bit as u8;
            if bit == 1 {
                state ^= cols[j] as usize;
            }
        }
    }
    debug_assert_eq!(state, 0);
    Ok((y, cost))
}

/// Syndrome of the first `m · ⌊n / m⌋` bits.
pub fn extract_bits(bits: &[u8], m: usize, h: usize) -> Result<Vec<u8>> {
    if m == 0 {
        return Ok(vec![]);
    }
    if m > bits.len() {
        return Err(Error::MessageTooLong {
            bits: m,
            limit: bits.len(),
        });
    }
    let w = bits.len() / m;
    let cols = submatrix(h, w);
    let mut state = 0u32;
    let mut out = Vec::with_capacity(m);
    let mut idx = 0;
    for _ in 0..m {
        for &col in &cols {
            if bits[idx] & 1 == 1 {
                state ^= col;
            }
            idx += 1;
        }
        out.push((state & 1) as u8);
        state >>= 1;
    }
    Ok(out)
}

fn permutation(n: usize, key: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(key));
    perm
}

fn message_limit(n: usize) -> usize {
    (MAX_RATE * n as f64).floor() as usize
}

/// Embed `message` (one bit per byte) into the coefficient LSBs of `cover`.
///
/// Each flip is realized as the cheaper of +1 / −1; a position where both are wet cannot flip.
pub fn stc_embed(
    cover: &CoefficientImage,
    cost: &CostMap,
    message: &[u8],
    key: u64,
    h: usize,
) -> Result<(ChangeMap, CoefficientImage)> {
    if cost.dims() != cover.dims() {
        return Err(Error::shape(cover.dims(), cost.dims()));
    }
    let n = cover.len();
    let limit = message_limit(n);
    if message.len() > limit {
        return Err(Error::MessageTooLong {
            bits: message.len(),
            limit,
        });
    }
    let (w, hgt) = cover.dims();
    if message.is_empty() {
        return Ok((ChangeMap::zeros(w, hgt), cover.clone()));
    }
    let perm = permutation(n, key);
    let coeffs = cover.coeffs();
    let bits: Vec<u8> = perm.iter().map(|&i| coeffs[i].rem_euclid(2) as u8).collect();
    let flip: Vec<(f64, i8)> = perm
        .iter()
        .map(|&i| {
            let (wp, wm) = (cost.is_wet_plus(i), cost.is_wet_minus(i));
            let (rp, rm) = (cost.plus()[i], cost.minus()[i]);
            match (wp, wm) {
                (true, true) => (f64::INFINITY, 0),
                (true, false) => (rm, -1),
                (false, true) => (rp, 1),
                (false, false) if rm < rp => (rm, -1),
                (false, false) => (rp, 1),
            }
        })
        .collect();
    let costs: Vec<f64> = flip.iter().map(|f| f.0).collect();
    let (y, _) = embed_bits(&bits, &costs, message, h)?;

    let mut changes = ChangeMap::zeros(w, hgt);
    for (k, (&yb, &xb)) in y.iter().zip(&bits).enumerate() {
        if yb != xb {
            changes.changes[perm[k]] = flip[k].1;
        }
    }
    changes.realized_bits = message.len() as f64;
    let stego = apply_changes(cover, &changes)?;
    Ok((changes, stego))
}

pub fn stc_extract(stego: &CoefficientImage, key: u64, message_len: usize, h: usize) -> Result<Vec<u8>> {
    let n = stego.len();
    let limit = message_limit(n);
    if message_len > limit {
        return Err(Error::MessageTooLong {
            bits: message_len,
            limit,
        });
    }
    let perm = permutation(n, key);
    let bits: Vec<u8> = perm
        .iter()
        .map(|&i| stego.coeffs()[i].rem_euclid(2) as u8)
        .collect();
    extract_bits(&bits, message_len, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_bits(seed: u64, n: usize) -> Vec<u8> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 63) as u8
            })
            .collect()
    }

    #[test]
    fn syndrome_matches_explicit_matrix() {
        let (m, w, h) = (7, 3, 4);
        let hm = parity_check_matrix(m, w, h);
        let y = lcg_bits(3, m * w);
        let direct: Vec<u8> = hm
            .iter()
            .map(|row| row.iter().zip(&y).fold(0, |a, (r, b)| a ^ (r & b)))
            .collect();
        assert_eq!(extract_bits(&y, m, h).unwrap(), direct);
    }

    #[test]
    fn embed_meets_syndrome() {
        let x = lcg_bits(1, 300);
        let costs: Vec<f64> = (0..300).map(|i| 1.0 + (i % 17) as f64).collect();
        let msg = lcg_bits(2, 60);
        let (y, c) = embed_bits(&x, &costs, &msg, 7).unwrap();
        assert_eq!(extract_bits(&y, 60, 7).unwrap(), msg);
        let realized: f64 = x.iter().zip(&y).zip(&costs).filter(|((a, b), _)| a != b).map(|(_, c)| c).sum();
        assert!((realized - c).abs() < 1e-9);
    }

    #[test]
    fn all_wet_is_rejected() {
        let x = vec![0u8; 20];
        let costs = vec![f64::INFINITY; 20];
        let msg = vec![1u8; 5];
        assert!(matches!(embed_bits(&x, &costs, &msg, 3), Err(Error::WetColumn)));
    }

    #[test]
    fn one_flip_touches_at_most_h_syndrome_bits() {
        let h = 5;
        let y = lcg_bits(9, 400);
        let base = extract_bits(&y, 50, h).unwrap();
        for i in [0usize, 17, 199, 399] {
            let mut z = y.clone();
            z[i] ^= 1;
            let s = extract_bits(&z, 50, h).unwrap();
            let d = s.iter().zip(&base).filter(|(a, b)| a != b).count();
            assert!(d <= h);
        }
    }
}
