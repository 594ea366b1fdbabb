//! Huffman table construction, code assignment and decoding (ITU T.81 Annex C, F.2.2.3, K.2).

use crate::error::{Error, Result};

/// A table as it appears in a DHT segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct HuffmanSpec {
    /// `bits[i]` = number of codes of length `i + 1`.
    pub bits: [u8; 16],
    pub values: Vec<u8>,
}

/// Canonical code assignment; `codes[symbol] = (code, length)`, length 0 for absent symbols.
pub(crate) fn assign_codes(spec: &HuffmanSpec) -> [(u16, u8); 256] {
    let mut codes = [(0u16, 0u8); 256];
    let mut code: u32 = 0;
    let mut k = 0;
    for len in 1..=16u8 {
        for _ in 0..spec.bits[len as usize - 1] {
            codes[spec.values[k] as usize] = (code as u16, len);
            code += 1;
            k += 1;
        }
        code <<= 1;
    }
    codes
}

/// Length-limited optimal table for the given symbol frequencies (Annex K.2).
pub(crate) fn optimal_spec(freq_in: &[u32; 256]) -> HuffmanSpec {
    let mut freq = [0u64; 257];
    for (f, &x) in freq.iter_mut().zip(freq_in.iter()) {
        *f = u64::from(x);
    }
    // reserved symbol keeps the all-ones code unused
    freq[256] = 1;
    let mut codesize = [0usize; 257];
    let mut others = [-1isize; 257];

    loop {
        // v1: least frequency, ties -> largest symbol; v2: next least
        let mut v1: Option<usize> = None;
        for i in 0..257 {
            if freq[i] > 0 && v1.is_none_or(|j| freq[i] <= freq[j]) {
                v1 = Some(i);
            }
        }
        let mut v2: Option<usize> = None;
        for i in 0..257 {
            if freq[i] > 0 && Some(i) != v1 && v2.is_none_or(|j| freq[i] <= freq[j]) {
                v2 = Some(i);
            }
        }
        let (Some(mut a), Some(mut b)) = (v1, v2) else {
            break;
        };
        freq[a] += freq[b];
        freq[b] = 0;
        codesize[a] += 1;
        while others[a] >= 0 {
            a = others[a] as usize;
            codesize[a] += 1;
        }
        others[a] = b as isize;
        codesize[b] += 1;
        while others[b] >= 0 {
            b = others[b] as usize;
            codesize[b] += 1;
        }
    }

    let mut bits = [0i32; 33];
    for &cs in codesize.iter() {
        if cs > 0 {
            bits[cs] += 1;
        }
    }
    for i in (17..=32).rev() {
        while bits[i] > 0 {
            let mut j = i - 2;
            while bits[j] == 0 {
                j -= 1;
            }
            bits[i] -= 2;
            bits[i - 1] += 1;
            bits[j + 1] += 2;
            bits[j] -= 1;
        }
    }
    let mut i = 16;
    while bits[i] == 0 {
        i -= 1;
    }
    bits[i] -= 1;

    let mut values = Vec::new();
    for len in 1..=32 {
        for (sym, &cs) in codesize.iter().enumerate().take(256) {
            if cs == len {
                values.push(sym as u8);
            }
        }
    }
    let mut out = [0u8; 16];
    for l in 0..16 {
        out[l] = bits[l + 1] as u8;
    }
    HuffmanSpec { bits: out, values }
}

/// Decoding tables per Annex F.2.2.3.
#[derive(Debug, Clone)]
pub(crate) struct DecodeTable {
    maxcode: [i32; 18],
    valptr: [i32; 17],
    mincode: [i32; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    pub fn new(spec: &HuffmanSpec) -> Result<Self> {
        let total: usize = spec.bits.iter().map(|&b| b as usize).sum();
        if total != spec.values.len() || total > 256 {
            return Err(Error::parse("DHT", "code count does not match symbol count"));
        }
        let mut maxcode = [-1i32; 18];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let n = i32::from(spec.bits[len - 1]);
            if n > 0 {
                valptr[len] = k;
                mincode[len] = code;
                code += n;
                k += n;
                maxcode[len] = code - 1;
            }
            if code > (1 << len) {
                return Err(Error::parse("DHT", "oversubscribed code lengths"));
            }
            code <<= 1;
        }
        maxcode[17] = i32::MAX;
        Ok(Self {
            maxcode,
            valptr,
            mincode,
            values: spec.values.clone(),
        })
    }

    pub fn decode(&self, reader: &mut super::decode::BitReader<'_>) -> Result<u8> {
        let mut code = reader.bit()? as i32;
        for len in 1..=16 {
            if code <= self.maxcode[len] {
                let idx = self.valptr[len] + code - self.mincode[len];
                return Ok(self.values[idx as usize]);
            }
            code = (code << 1) | reader.bit()? as i32;
        }
        Err(Error::parse("SOS", "invalid Huffman code in entropy-coded data"))
    }
}
