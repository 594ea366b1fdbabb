use super::huffman::{assign_codes, optimal_spec, HuffmanSpec};
use super::quant::ZIGZAG;
use super::{coeff_range, CoefficientImage};
use crate::error::{Error, Result};

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self { out, acc: 0, nbits: 0 }
    }

    fn put(&mut self, code: u32, len: u32) {
        debug_assert!(len <= 16);
        self.acc = (self.acc << len) | (code & ((1 << len) - 1));
        self.nbits += len;
        while self.nbits >= 8 {
            let b = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(b);
            if b == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

fn category(v: i32) -> u32 {
    32 - v.unsigned_abs().leading_zeros()
}

fn extra_bits(v: i32, cat: u32) -> u32 {
    if v >= 0 {
        v as u32
    } else {
        (v + (1 << cat) - 1) as u32
    }
}

enum Symbol {
    Dc(u8, u32),
    Ac(u8, u32),
}

/// Walks every block and reports its Huffman symbols with their extra bits.
fn for_each_symbol(img: &CoefficientImage, mut f: impl FnMut(Symbol, u32)) {
    let mut pred = 0i32;
    for by in 0..img.blocks_tall() {
        for bx in 0..img.blocks_wide() {
            let blk = img.block(by, bx);
            let dc = i32::from(blk[0]);
            let diff = dc - pred;
            pred = dc;
            let cat = category(diff);
            f(Symbol::Dc(cat as u8, cat), extra_bits(diff, cat));
            let mut run = 0u8;
            for &n in ZIGZAG.iter().skip(1) {
                let v = i32::from(blk[n]);
                if v == 0 {
                    run += 1;
                    continue;
                }
                while run >= 16 {
                    f(Symbol::Ac(0xF0, 0), 0);
                    run -= 16;
                }
                let cat = category(v);
                f(Symbol::Ac((run << 4) | cat as u8, cat), extra_bits(v, cat));
                run = 0;
            }
            if run > 0 {
                f(Symbol::Ac(0x00, 0), 0);
            }
        }
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, body: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((body.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(body);
}

fn dht_body(class_id: u8, spec: &HuffmanSpec) -> Vec<u8> {
    let mut b = vec![class_id];
    b.extend_from_slice(&spec.bits);
    b.extend_from_slice(&spec.values);
    b
}

/// Serialize a coefficient image as a baseline JPEG with optimal Huffman tables.
pub fn encode_jpeg(img: &CoefficientImage) -> Result<Vec<u8>> {
    let (w, h) = img.dims();
    if w > 65535 || h > 65535 {
        return Err(Error::Encode(format!("{w}x{h} exceeds JPEG limits")));
    }
    for (i, &c) in img.coeffs().iter().enumerate() {
        let (lo, hi) = coeff_range(i / w, i % w);
        if c < lo || c > hi {
            return Err(Error::Encode(format!(
                "coefficient {c} at ({}, {}) outside [{lo}, {hi}]",
                i / w,
                i % w
            )));
        }
    }

    let mut dc_freq = [0u32; 256];
    let mut ac_freq = [0u32; 256];
    for_each_symbol(img, |s, _| match s {
        Symbol::Dc(sym, _) => dc_freq[sym as usize] += 1,
        Symbol::Ac(sym, _) => ac_freq[sym as usize] += 1,
    });
    let dc_spec = optimal_spec(&dc_freq);
    let ac_spec = optimal_spec(&ac_freq);
    let dc_codes = assign_codes(&dc_spec);
    let ac_codes = assign_codes(&ac_spec);

    let mut out = vec![0xFF, 0xD8];
    segment(
        &mut out,
        0xE0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
    let mut dqt = vec![0x00];
    dqt.extend(img.quant_table().zigzag().iter().map(|&q| q as u8));
    segment(&mut out, 0xDB, &dqt);
    let mut sof = vec![8];
    sof.extend_from_slice(&(h as u16).to_be_bytes());
    sof.extend_from_slice(&(w as u16).to_be_bytes());
    sof.extend_from_slice(&[1, 1, 0x11, 0]);
    segment(&mut out, 0xC0, &sof);
    segment(&mut out, 0xC4, &dht_body(0x00, &dc_spec));
    segment(&mut out, 0xC4, &dht_body(0x10, &ac_spec));
    segment(&mut out, 0xDA, &[1, 1, 0x00, 0, 63, 0]);

    let mut bw = BitWriter::new(out);
    for_each_symbol(img, |s, extra| {
        let (code, len, cat) = match s {
            Symbol::Dc(sym, cat) => {
                let (c, l) = dc_codes[sym as usize];
                (c, l, cat)
            }
            Symbol::Ac(sym, cat) => {
                let (c, l) = ac_codes[sym as usize];
                (c, l, cat)
            }
        };
        bw.put(u32::from(code), u32::from(len));
        if cat > 0 {
            bw.put(extra, cat);
        }
    });
    let mut out = bw.finish();
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(out)
}
