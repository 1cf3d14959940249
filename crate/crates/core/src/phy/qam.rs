//! Gray-labelled QAM constellations with unit average energy.
//!
//! Labels follow the usual 5G NR bit-to-point tables. A symbol label is read
//! MSB-first: bit `b0` is the first bit of the symbol in the stream and the
//! most significant bit of the point index.
//!
//! | scheme | I component                      | Q component                      | scale  |
//! |--------|----------------------------------|----------------------------------|--------|
//! | QPSK   | `1-2b0`                          | `1-2b1`                          | `1/√2` |
//! | 16QAM  | `(1-2b0)(2-(1-2b2))`             | `(1-2b1)(2-(1-2b3))`             | `1/√10`|
//! | 64QAM  | `(1-2b0)(4-(1-2b2)(2-(1-2b4)))`  | `(1-2b1)(4-(1-2b3)(2-(1-2b5)))`  | `1/√42`|

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("unknown modulation `{name}`")))
    }

    pub fn from_bits_per_symbol(k: usize) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.bits_per_symbol() == k)
            .ok_or_else(|| Error::Config(format!("no modulation carries {k} bits per symbol")))
    }

    /// Squared normalization of the odd-integer lattice.
    pub fn energy_denominator(self) -> i64 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 10,
            Modulation::Qam64 => 42,
        }
    }

    /// Integer lattice coordinates `(I, Q)` indexed by label.
    pub fn lattice(self) -> Vec<(i64, i64)> {
        let k = self.bits_per_symbol();
        (0..1usize << k)
            .map(|label| {
                let bit = |i: usize| ((label >> (k - 1 - i)) & 1) as i64;
                let s = |i: usize| 1 - 2 * bit(i);
                match self {
                    Modulation::Qpsk => (s(0), s(1)),
                    Modulation::Qam16 => (s(0) * (2 - s(2)), s(1) * (2 - s(3))),
                    Modulation::Qam64 => (s(0) * (4 - s(2) * (2 - s(4))), s(1) * (4 - s(3) * (2 - s(5)))),
                }
            })
            .collect()
    }

    /// Constellation points indexed by label.
    pub fn points(self) -> Vec<Complex64> {
        let scale = 1.0 / libm::sqrt(self.energy_denominator() as f64);
        self.lattice().into_iter().map(|(i, q)| Complex64::new(i as f64 * scale, q as f64 * scale)).collect()
    }
}

/// Maps `bits` (0/1, MSB-first within each symbol) onto constellation points.
pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<Complex64>> {
    let k = modulation.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::Usage(format!("{} bits is not a multiple of {k} bits per symbol", bits.len())));
    }
    let points = modulation.points();
    bits.chunks_exact(k)
        .map(|chunk| {
            let mut label = 0usize;
            for &b in chunk {
                if b > 1 {
                    return Err(Error::Usage(format!("bit value {b} is not 0 or 1")));
                }
                label = (label << 1) | b as usize;
            }
            Ok(points[label])
        })
        .collect()
}

/// Max-log bit LLRs `log P(b=1)/P(b=0)` for one received symbol with
/// complex noise variance `noise_var` (`E|w|^2`). Appends `K` values to `out`.
pub fn demap_maxlog(y: Complex64, noise_var: f64, points: &[Complex64], out: &mut Vec<f64>) {
    let k = points.len().trailing_zeros() as usize;
    let inv = 1.0 / noise_var;
    for bit in 0..k {
        let mask = 1 << (k - 1 - bit);
        let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
        for (label, p) in points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if label & mask == 0 {
                d0 = d0.min(d);
            } else {
                d1 = d1.min(d);
            }
        }
        out.push((d0 - d1) * inv);
    }
}
