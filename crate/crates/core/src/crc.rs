//! Bit-level CRC, MSB first, no reflection and no final XOR.
//!
//! A polynomial of width `P` is stored without its implicit `x^P` term, so
//! `x^8 + x^2 + x + 1` is `0x07`.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrcSpec {
    width: usize,
    poly: u64,
    init: u64,
}

impl CrcSpec {
    pub const SUPPORTED_WIDTHS: [usize; 4] = [0, 4, 8, 16];

    pub fn new(width: usize, poly: u64, init: u64) -> Result<Self> {
        if !Self::SUPPORTED_WIDTHS.contains(&width) {
            return Err(Error::Config(format!(
                "CRC width {width} not in {:?}",
                Self::SUPPORTED_WIDTHS
            )));
        }
        let limit = 1u64 << width;
        // An explicit leading term is accepted and dropped.
        let poly = if width > 0 && poly >= limit && poly < 2 * limit && poly & limit != 0 {
            poly ^ limit
        } else {
            poly
        };
        if width > 0 && (poly >= limit || poly & 1 == 0) {
            return Err(Error::Config(format!(
                "CRC polynomial {poly:#x} is not a width-{width} polynomial with constant term 1"
            )));
        }
        if width == 0 && poly != 0 {
            return Err(Error::Config("width-0 CRC cannot have a polynomial".into()));
        }
        if init >= limit {
            return Err(Error::Config(format!("CRC init {init:#x} wider than {width} bits")));
        }
        Ok(Self { width, poly, init })
    }

    /// x^4+x+1, x^8+x^2+x+1 and x^16+x^12+x^5+1 (CCITT), all with zero init.
    pub fn standard(width: usize) -> Result<Self> {
        let poly = match width {
            0 => 0,
            4 => 0x3,
            8 => 0x07,
            16 => 0x1021,
            _ => return Self::new(width, 0, 0),
        };
        Self::new(width, poly, 0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn poly(&self) -> u64 {
        self.poly
    }

    pub fn init(&self) -> u64 {
        self.init
    }

    /// Remainder left in the shift register after feeding `bits`.
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        if self.width == 0 {
            return 0;
        }
        let mask = (1u64 << self.width) - 1;
        let top = self.width - 1;
        bits.iter().fold(self.init, |reg, &b| {
            let feedback = ((reg >> top) & 1) ^ u64::from(b & 1);
            let shifted = (reg << 1) & mask;
            if feedback == 1 {
                shifted ^ self.poly
            } else {
                shifted
            }
        })
    }
}

/// `info` followed by its `P` check bits, most significant first.
pub fn crc_append(info: &[u8], spec: &CrcSpec) -> Vec<u8> {
    let rem = spec.remainder(info);
    let mut word = Vec::with_capacity(info.len() + spec.width);
    word.extend_from_slice(info);
    word.extend((0..spec.width).rev().map(|i| ((rem >> i) & 1) as u8));
    word
}

pub fn crc_check(word: &[u8], spec: &CrcSpec) -> bool {
    word.len() >= spec.width && spec.remainder(word) == 0
}
