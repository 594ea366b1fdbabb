//! Fixed high-pass front end: a reduced SRM bank, all on a 5×5 support.

use sha2::{Digest, Sha256};

pub const KERNEL_COUNT: usize = 8;
pub const KERNEL_SIZE: usize = 5;
pub const KERNEL_RADIUS: usize = 2;

pub type Kernel = [f64; KERNEL_SIZE * KERNEL_SIZE];

const fn embed3(k: [f64; 9], scale: f64) -> Kernel {
    let mut out = [0.0; 25];
    let mut r = 0;
    while r < 3 {
        let mut c = 0;
        while c < 3 {
            out[(r + 1) * 5 + c + 1] = k[r * 3 + c] / scale;
            c += 1;
        }
        r += 1;
    }
    out
}

const fn scale5(k: [f64; 25], scale: f64) -> Kernel {
    let mut out = [0.0; 25];
    let mut i = 0;
    while i < 25 {
        out[i] = k[i] / scale;
        i += 1;
    }
    out
}

/// KV, four first-order directional differences (→ ↓ ↘ ↙), second-order
/// horizontal and vertical, and the 3×3 SQUARE kernel. Every kernel sums to zero.
pub static KERNELS: [Kernel; KERNEL_COUNT] = [
    scale5(
        [
            -1.0, 2.0, -2.0, 2.0, -1.0, //
            2.0, -6.0, 8.0, -6.0, 2.0, //
            -2.0, 8.0, -12.0, 8.0, -2.0, //
            2.0, -6.0, 8.0, -6.0, 2.0, //
            -1.0, 2.0, -2.0, 2.0, -1.0,
        ],
        12.0,
    ),
    embed3([0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0], 1.0),
    embed3([0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0], 1.0),
    embed3([0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0], 1.0),
    embed3([0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0], 1.0),
    embed3([0.0, 0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0, 0.0], 2.0),
    embed3([0.0, 1.0, 0.0, 0.0, -2.0, 0.0, 0.0, 1.0, 0.0], 2.0),
    embed3([-1.0, 2.0, -1.0, 2.0, -4.0, 2.0, -1.0, 2.0, -1.0], 4.0),
];

/// SHA-256 over the little-endian bytes of the bank.
pub fn kernel_checksum() -> String {
    let mut h = Sha256::new();
    for k in KERNELS.iter() {
        for v in k {
            h.update(v.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
