use super::huffman::{DecodeTable, HuffmanSpec};
use super::quant::{QuantTable, ZIGZAG};
use super::{coeff_range, CoefficientImage};
use crate::error::{Error, Result};

/// Entropy-coded segment reader. Handles 0xFF00 stuffing; stops at any other marker.
pub(crate) struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
    /// Marker met inside the segment, not yet consumed by the caller.
    marker: Option<u8>,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        Self {
            data,
            pos,
            acc: 0,
            nbits: 0,
            marker: None,
        }
    }

    fn fill(&mut self) -> Result<()> {
        if self.marker.is_some() {
            return Err(Error::parse(
                "SOS",
                "entropy-coded data ended before the scan was complete",
            ));
        }
        let Some(&b) = self.data.get(self.pos) else {
            return Err(Error::parse("SOS", "truncated entropy-coded data"));
        };
        if b == 0xFF {
            let next = self.data.get(self.pos + 1).copied().unwrap_or(0xD9);
            if next == 0x00 {
                self.pos += 2;
            } else {
                self.marker = Some(next);
                return Err(Error::parse(
                    format!("0xFF{next:02X}"),
                    "marker inside scan before the last block",
                ));
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | u32::from(b);
        self.nbits += 8;
        Ok(())
    }

    pub fn bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn bits(&mut self, n: u32) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    /// Drops the partial byte and consumes an expected RSTn marker.
    fn restart(&mut self, expected: u8) -> Result<()> {
        self.nbits = 0;
        self.acc = 0;
        let found = match self.marker.take() {
            Some(m) => m,
            None => {
                if self.data.get(self.pos) != Some(&0xFF) {
                    return Err(Error::parse("RST", "restart marker missing"));
                }
                let m = self.data.get(self.pos + 1).copied().unwrap_or(0);
                self.pos += 2;
                return check_rst(m, expected);
            }
        };
        self.pos += 2;
        check_rst(found, expected)
    }

    /// Position just past the entropy-coded data.
    fn end(&self) -> usize {
        let mut p = self.pos;
        // skip padding up to the next real marker
        while p + 1 < self.data.len() && !(self.data[p] == 0xFF && self.data[p + 1] != 0x00) {
            p += 1;
        }
        p
    }
}

fn check_rst(found: u8, expected: u8) -> Result<()> {
    if found == 0xD0 + expected {
        Ok(())
    } else {
        Err(Error::parse(
            format!("0xFF{found:02X}"),
            format!("expected RST{expected}"),
        ))
    }
}

fn extend(v: u32, s: u32) -> i32 {
    if s == 0 {
        0
    } else if v < (1 << (s - 1)) {
        v as i32 - (1 << s) + 1
    } else {
        v as i32
    }
}

struct Frame {
    width: usize,
    height: usize,
    component_id: u8,
    table_id: u8,
}

fn marker_name(m: u8) -> String {
    match m {
        0xC0..=0xCF if m != 0xC4 && m != 0xC8 && m != 0xCC => format!("SOF{}", m - 0xC0),
        0xC4 => "DHT".into(),
        0xCC => "DAC".into(),
        0xD8 => "SOI".into(),
        0xD9 => "EOI".into(),
        0xDA => "SOS".into(),
        0xDB => "DQT".into(),
        0xDD => "DRI".into(),
        0xE0..=0xEF => format!("APP{}", m - 0xE0),
        0xFE => "COM".into(),
        _ => format!("0xFF{m:02X}"),
    }
}

fn u16_at(b: &[u8], p: usize, marker: &str) -> Result<usize> {
    match b.get(p..p + 2) {
        Some(s) => Ok(usize::from(u16::from_be_bytes([s[0], s[1]]))),
        None => Err(Error::parse(marker, "segment truncated")),
    }
}

/// Parse a baseline, 8-bit, single-component JPEG down to its quantized coefficients.
pub fn decode_jpeg(bytes: &[u8]) -> Result<CoefficientImage> {
    if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != 0xD8 {
        return Err(Error::parse("SOI", "stream does not start with SOI"));
    }
    let mut pos = 2;
    let mut qtables: [Option<[u16; 64]>; 4] = [None; 4];
    let mut dc_tables: [Option<DecodeTable>; 4] = Default::default();
    let mut ac_tables: [Option<DecodeTable>; 4] = Default::default();
    let mut frame: Option<Frame> = None;
    let mut restart_interval = 0usize;
    let mut result: Option<Vec<i16>> = None;

    loop {
        // find the next marker, skipping fill bytes
        while pos < bytes.len() && bytes[pos] != 0xFF {
            pos += 1;
        }
        while pos < bytes.len() && bytes[pos] == 0xFF {
            pos += 1;
        }
        let Some(&m) = bytes.get(pos) else {
            if result.is_some() {
                log::warn!("JPEG stream ends without EOI");
                break;
            }
            let after = if frame.is_some() { "SOF0" } else { "header" };
            return Err(Error::parse(
                "SOS",
                format!("missing SOS: stream ended after {after}"),
            ));
        };
        pos += 1;
        let name = marker_name(m);

        match m {
            0xD9 => {
                if result.is_none() {
                    return Err(Error::parse("SOS", "missing SOS before EOI"));
                }
                break;
            }
            0xD8 | 0x01 | 0xD0..=0xD7 => continue,
            _ => {}
        }

        let len = u16_at(bytes, pos, &name)?;
        if len < 2 || pos + len > bytes.len() {
            return Err(Error::parse(&name, "segment length exceeds stream"));
        }
        let seg = &bytes[pos + 2..pos + len];
        let seg_end = pos + len;

        match m {
            0xC0 => {
                if frame.is_some() {
                    return Err(Error::parse("SOF0", "multiple frames"));
                }
                if seg.len() < 6 {
                    return Err(Error::parse("SOF0", "segment truncated"));
                }
                if seg[0] != 8 {
                    return Err(Error::parse(
                        "SOF0",
                        format!("unsupported sample precision {}", seg[0]),
                    ));
                }
                let height = u16_at(seg, 1, "SOF0")?;
                let width = u16_at(seg, 3, "SOF0")?;
                let ncomp = seg[5];
                if ncomp != 1 {
                    return Err(Error::parse(
                        "SOF0",
                        format!("{ncomp} components; only grayscale is supported"),
                    ));
                }
                if seg.len() < 9 {
                    return Err(Error::parse("SOF0", "segment truncated"));
                }
                if width == 0 || height == 0 || width % 8 != 0 || height % 8 != 0 {
                    return Err(Error::parse(
                        "SOF0",
                        format!("dimensions {width}x{height} are not positive multiples of 8"),
                    ));
                }
                frame = Some(Frame {
                    width,
                    height,
                    component_id: seg[6],
                    table_id: seg[8] & 0x0F,
                });
            }
            0xC1..=0xCF if m != 0xC4 && m != 0xC8 => {
                let what = match m {
                    0xC2 | 0xC6 | 0xCA | 0xCE => "progressive JPEG is not supported",
                    0xCC => "arithmetic coding is not supported",
                    0xC1 => "extended sequential JPEG is not supported",
                    _ => "only baseline sequential JPEG is supported",
                };
                return Err(Error::parse(name, what));
            }
            0xC4 => {
                let mut p = 0;
                while p < seg.len() {
                    if p + 17 > seg.len() {
                        return Err(Error::parse("DHT", "segment truncated"));
                    }
                    let class = seg[p] >> 4;
                    let id = (seg[p] & 0x0F) as usize;
                    if class > 1 || id > 3 {
                        return Err(Error::parse("DHT", "bad table class or id"));
                    }
                    let mut bits = [0u8; 16];
                    bits.copy_from_slice(&seg[p + 1..p + 17]);
                    let n: usize = bits.iter().map(|&b| b as usize).sum();
                    let Some(values) = seg.get(p + 17..p + 17 + n) else {
                        return Err(Error::parse("DHT", "segment truncated"));
                    };
                    let table = DecodeTable::new(&HuffmanSpec {
                        bits,
                        values: values.to_vec(),
                    })?;
                    if class == 0 {
                        dc_tables[id] = Some(table);
                    } else {
                        ac_tables[id] = Some(table);
                    }
                    p += 17 + n;
                }
            }
            0xDB => {
                let mut p = 0;
                while p < seg.len() {
                    let precision = seg[p] >> 4;
                    let id = (seg[p] & 0x0F) as usize;
                    if id > 3 || precision > 1 {
                        return Err(Error::parse("DQT", "bad table precision or id"));
                    }
                    let size = if precision == 0 { 64 } else { 128 };
                    let Some(body) = seg.get(p + 1..p + 1 + size) else {
                        return Err(Error::parse("DQT", "segment truncated"));
                    };
                    let mut t = [0u16; 64];
                    for (k, v) in t.iter_mut().enumerate() {
                        *v = if precision == 0 {
                            u16::from(body[k])
                        } else {
                            u16::from_be_bytes([body[2 * k], body[2 * k + 1]])
                        };
                    }
                    qtables[id] = Some(t);
                    p += 1 + size;
                }
            }
            0xDD => {
                restart_interval = u16_at(seg, 0, "DRI")?;
            }
            0xDA => {
                let Some(fr) = frame.as_ref() else {
                    return Err(Error::parse("SOS", "scan before SOF0"));
                };
                if result.is_some() {
                    return Err(Error::parse("SOS", "more than one scan"));
                }
                if seg.len() < 6 || seg[0] != 1 {
                    return Err(Error::parse("SOS", "scan must contain exactly one component"));
                }
                if seg[1] != fr.component_id {
                    return Err(Error::parse("SOS", "scan component does not match frame"));
                }
                let (td, ta) = ((seg[2] >> 4) as usize, (seg[2] & 0x0F) as usize);
                if seg[3] != 0 || seg[4] != 63 || seg[5] != 0 {
                    return Err(Error::parse("SOS", "spectral selection is not baseline"));
                }
                let dc = dc_tables
                    .get(td)
                    .and_then(|t| t.as_ref())
                    .ok_or_else(|| Error::parse("DHT", format!("DC table {td} missing")))?;
                let ac = ac_tables
                    .get(ta)
                    .and_then(|t| t.as_ref())
                    .ok_or_else(|| Error::parse("DHT", format!("AC table {ta} missing")))?;
                let mut reader = BitReader::new(bytes, seg_end);
                let coeffs = decode_scan(&mut reader, fr, dc, ac, restart_interval)?;
                pos = reader.end();
                result = Some(coeffs);
                continue;
            }
            _ => {}
        }
        pos = seg_end;
    }

    let fr = frame.ok_or_else(|| Error::parse("SOF0", "missing frame header"))?;
    let q = qtables[fr.table_id as usize & 3]
        .ok_or_else(|| Error::parse("DQT", format!("table {} missing", fr.table_id)))?;
    let quant = QuantTable::from_zigzag(q).map_err(|e| Error::parse("DQT", e.to_string()))?;
    let quality = quant.ijg_quality();
    CoefficientImage::new(fr.width, fr.height, result.unwrap_or_default(), quant, quality)
        .map_err(|e| Error::parse("SOS", e.to_string()))
}

fn decode_scan(
    reader: &mut BitReader<'_>,
    fr: &Frame,
    dc: &DecodeTable,
    ac: &DecodeTable,
    restart_interval: usize,
) -> Result<Vec<i16>> {
    let (bw, bh) = (fr.width / 8, fr.height / 8);
    let mut coeffs = vec![0i16; fr.width * fr.height];
    let mut pred = 0i32;
    let mut rst = 0u8;
    for b in 0..bw * bh {
        if restart_interval > 0 && b > 0 && b % restart_interval == 0 {
            reader.restart(rst)?;
            rst = (rst + 1) % 8;
            pred = 0;
        }
        let mut blk = [0i32; 64];
        let s = u32::from(dc.decode(reader)?);
        if s > 11 {
            return Err(Error::parse("SOS", format!("DC magnitude category {s}")));
        }
        pred += extend(reader.bits(s)?, s);
        blk[0] = pred;
        let mut k = 1;
        while k < 64 {
            let rs = ac.decode(reader)?;
            let (r, s) = (usize::from(rs >> 4), u32::from(rs & 0x0F));
            if s == 0 {
                if r == 15 {
                    k += 16;
                    continue;
                }
                break;
            }
            k += r;
            if k > 63 {
                return Err(Error::parse("SOS", "AC run past end of block"));
            }
            blk[ZIGZAG[k]] = extend(reader.bits(s)?, s);
            k += 1;
        }
        if k > 64 {
            return Err(Error::parse("SOS", "AC run past end of block"));
        }
        let (by, bx) = (b / bw, b % bw);
        for u in 0..8 {
            for v in 0..8 {
                let val = blk[u * 8 + v];
                let (lo, hi) = coeff_range(u, v);
                if val < i32::from(lo) || val > i32::from(hi) {
                    return Err(Error::parse(
                        "SOS",
                        format!("coefficient {val} outside [{lo}, {hi}]"),
                    ));
                }
                coeffs[(by * 8 + u) * fr.width + bx * 8 + v] = val as i16;
            }
        }
    }
    Ok(coeffs)
}
