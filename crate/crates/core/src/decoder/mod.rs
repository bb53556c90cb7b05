//! Successive-cancellation decoding over the polar code tree.
//!
//! Both decoders work on the binary tree in which a node at layer `m` covers
//! `2^m` bits. Soft messages (`α`) travel down, hard partial sums (`β`) travel
//! up. [`sc`] is a direct recursive traversal; [`scl`] keeps a list of paths,
//! exposes a bit-by-bit stepping API and selects the output by PM, by CRC or
//! by genie.

mod sc;
mod scl;

pub use sc::{sc_decode, sc_traverse};
pub use scl::{scl_decode, DecodePath, SclSession, StepReport};

use crate::crc::CrcSpec;
use crate::{Error, Result};

/// Min-sum check-node update: `sgn(a·b) · min(|a|, |b|)` with `sgn(0) = +1`.
#[inline]
pub fn f_min_sum(a: f64, b: f64) -> f64 {
    let mag = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -mag
    } else {
        mag
    }
}

/// Variable-node update given the left partial sum: `b + (1 − 2β)·a`.
#[inline]
pub fn g_combine(a: f64, b: f64, beta_left: u8) -> f64 {
    if beta_left == 0 {
        b + a
    } else {
        b - a
    }
}

/// `(β_left ⊕ β_right, β_right)`.
pub fn combine_partial_sums(beta_left: &[u8], beta_right: &[u8]) -> Result<Vec<u8>> {
    if beta_left.len() != beta_right.len() {
        return Err(Error::InvalidArgument(format!(
            "partial sums of length {} and {}",
            beta_left.len(),
            beta_right.len()
        )));
    }
    let mut beta: Vec<u8> = beta_left.iter().zip(beta_right).map(|(l, r)| l ^ r).collect();
    beta.extend_from_slice(beta_right);
    Ok(beta)
}

/// Hard decision at a leaf: 0 when `α ≥ 0`.
#[inline]
pub(crate) fn hard_decision(alpha: f64) -> u8 {
    u8::from(alpha < 0.0)
}

/// Path-metric increment for deciding `bit` at a leaf with soft value `alpha`.
#[inline]
pub fn leaf_penalty(alpha: f64, bit: u8) -> f64 {
    if bit == hard_decision(alpha) {
        0.0
    } else {
        alpha.abs()
    }
}

/// How the final codeword is picked from the list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Lowest path metric.
    Pure,
    /// Lowest path metric among paths whose information bits pass the CRC.
    CrcAided(CrcSpec),
    /// Succeeds whenever the transmitted word is still in the list.
    Genie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SclConfig {
    pub list_size: usize,
    pub selection: Selection,
}

impl SclConfig {
    pub fn new(list_size: usize, selection: Selection) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::Config("list size must be at least 1".into()));
        }
        Ok(Self { list_size, selection })
    }

    pub fn pure(list_size: usize) -> Result<Self> {
        Self::new(list_size, Selection::Pure)
    }

    pub fn genie(list_size: usize) -> Result<Self> {
        Self::new(list_size, Selection::Genie)
    }

    pub fn crc_aided(list_size: usize, crc: CrcSpec) -> Result<Self> {
        Self::new(list_size, Selection::CrcAided(crc))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutcome {
    /// Decisions on the nonfrozen positions, ascending.
    pub decoded: Vec<u8>,
    /// Full decided input vector of the selected path.
    pub u_hat: Vec<u8>,
    pub frame_error: bool,
    /// Whether the transmitted word was still in the final list (needs a known reference).
    pub genie_survived: bool,
    pub pm_of_selected: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::polar_transform;

    #[test]
    fn f_examples() {
        assert_eq!(f_min_sum(2.0, -3.0), -2.0);
        assert_eq!(f_min_sum(0.0, 5.0), 0.0);
        assert_eq!(f_min_sum(-4.0, -1.0), 1.0);
        assert_eq!(f_min_sum(-0.0, -3.0), 0.0);
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_combine(2.0, 3.0, 1), 1.0);
        assert_eq!(g_combine(2.0, 3.0, 0), 5.0);
        for beta in [0, 1] {
            assert_eq!(g_combine(0.0, -1.5, beta), -1.5);
        }
    }

    #[test]
    fn partial_sum_examples() {
        assert_eq!(combine_partial_sums(&[1], &[1]).unwrap(), vec![0, 1]);
        assert_eq!(combine_partial_sums(&[0, 0], &[0, 0]).unwrap(), vec![0; 4]);
        assert!(combine_partial_sums(&[0], &[0, 1]).is_err());

        // Leaves of u = (0,0,0,1) combined up two layers give its codeword.
        let layer1_left = combine_partial_sums(&[0], &[0]).unwrap();
        let layer1_right = combine_partial_sums(&[0], &[1]).unwrap();
        assert_eq!(
            combine_partial_sums(&layer1_left, &layer1_right).unwrap(),
            polar_transform(&[0, 0, 0, 1]).unwrap()
        );
    }

    #[test]
    fn penalties() {
        assert_eq!(leaf_penalty(1.5, 0), 0.0);
        assert_eq!(leaf_penalty(1.5, 1), 1.5);
        assert_eq!(leaf_penalty(-2.0, 0), 2.0);
        assert_eq!(leaf_penalty(-2.0, 1), 0.0);
        assert_eq!(leaf_penalty(0.0, 1), 0.0);
        assert!(SclConfig::pure(0).is_err());
    }
}
