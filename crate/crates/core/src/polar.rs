//! Polar transform, encoding and code constructions.
//!
//! Bits are `u8` values restricted to `{0, 1}`. Indexing is natural order
//! throughout: `x = u · G^{⊗n}` with `G = [[1, 0], [1, 1]]` and no bit-reversal,
//! so bit `k` of `u` is decoded at leaf `k` of the SC tree and chosen at step
//! `k` of the construction game.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::game::Action;
use crate::{Error, Result, MAX_LOG2_N};

const HEADER: &str = "polar-construction v1";

/// Returns `log2(len)` if `len` is a supported block length.
pub fn log2_block_length(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() || len > 1 << MAX_LOG2_N {
        return Err(Error::InvalidLength(len));
    }
    Ok(len.trailing_zeros() as usize)
}

pub(crate) fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::InvalidArgument(format!(
            "element {i} is {}, expected 0 or 1",
            bits[i]
        ))),
        None => Ok(()),
    }
}

/// In-place butterfly computing `x = u · G^{⊗n}` over GF(2).
///
/// The caller guarantees a power-of-two length.
pub(crate) fn transform_in_place(x: &mut [u8]) {
    let len = x.len();
    let mut half = 1;
    while half < len {
        for block in x.chunks_exact_mut(2 * half) {
            let (left, right) = block.split_at_mut(half);
            for (l, r) in left.iter_mut().zip(right.iter()) {
                *l ^= *r;
            }
        }
        half *= 2;
    }
}

/// Polar transform of `u`. The transform is its own inverse.
pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    log2_block_length(u.len())?;
    check_bits(u)?;
    let mut x = u.to_vec();
    transform_in_place(&mut x);
    Ok(x)
}

/// Choice of which of the `N` input positions carry information.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CodeConstruction {
    log2_n: usize,
    k: usize,
    frozen: Vec<bool>,
}

impl CodeConstruction {
    /// Builds a construction from a frozen mask (`true` = frozen).
    pub fn new(frozen: Vec<bool>) -> Result<Self> {
        let log2_n = log2_block_length(frozen.len())?;
        let k = frozen.iter().filter(|&&f| !f).count();
        Ok(Self { log2_n, k, frozen })
    }

    /// Builds a length-`n_total` construction whose nonfrozen positions are `info`.
    pub fn from_info_positions(n_total: usize, info: &[usize]) -> Result<Self> {
        let mut frozen = vec![true; n_total];
        for &i in info {
            if i >= n_total {
                return Err(Error::InvalidArgument(format!(
                    "position {i} out of range for N = {n_total}"
                )));
            }
            if !frozen[i] {
                return Err(Error::InvalidArgument(format!("position {i} listed twice")));
            }
            frozen[i] = false;
        }
        Self::new(frozen)
    }

    /// Converts a maze path into a construction: `Down` freezes bit `k`,
    /// `Right` makes it an information bit.
    pub fn from_actions(actions: &[Action], n_total: usize, k: usize) -> Result<Self> {
        if actions.len() != n_total {
            return Err(Error::PathLeavesMaze(format!(
                "{} actions for a maze of {n_total} steps",
                actions.len()
            )));
        }
        let rights = actions.iter().filter(|&&a| a == Action::Right).count();
        if rights != k {
            return Err(Error::PathLeavesMaze(format!(
                "{rights} right moves, the maze needs exactly {k}"
            )));
        }
        Self::new(actions.iter().map(|&a| a == Action::Down).collect())
    }

    /// The maze path that induces this construction.
    pub fn to_actions(&self) -> Vec<Action> {
        self.frozen
            .iter()
            .map(|&f| if f { Action::Down } else { Action::Right })
            .collect()
    }

    pub fn log2_n(&self) -> usize {
        self.log2_n
    }

    /// Block length `N`.
    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    /// Number of nonfrozen positions `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// Nonfrozen positions in ascending order.
    pub fn info_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.frozen[i]).collect()
    }

    /// Places `info` on the nonfrozen positions (ascending), zeros elsewhere.
    pub fn place(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "{} information bits for K = {}",
                info.len(),
                self.k
            )));
        }
        check_bits(info)?;
        let mut u = vec![0u8; self.len()];
        for (pos, &bit) in self.info_positions().into_iter().zip(info) {
            u[pos] = bit;
        }
        Ok(u)
    }

    /// Reads the nonfrozen positions of `u`.
    pub fn extract(&self, u: &[u8]) -> Vec<u8> {
        u.iter()
            .zip(&self.frozen)
            .filter(|(_, &f)| !f)
            .map(|(&b, _)| b)
            .collect()
    }

    /// Encodes `info` into a codeword of length `N`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let mut u = self.place(info)?;
        transform_in_place(&mut u);
        Ok(u)
    }

    /// Frozen mask as a string of `'1'` (frozen) and `'0'` (nonfrozen).
    pub fn mask_string(&self) -> String {
        self.frozen.iter().map(|&f| if f { '1' } else { '0' }).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        text.parse()
    }
}

/// Free-function form of [`CodeConstruction::encode`].
pub fn encode(info: &[u8], c: &CodeConstruction) -> Result<Vec<u8>> {
    c.encode(info)
}

impl fmt::Display for CodeConstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{HEADER}")?;
        writeln!(f, "N {} K {}", self.len(), self.k)?;
        writeln!(f, "frozen {}", self.mask_string())
    }
}

impl FromStr for CodeConstruction {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim_end() == HEADER => {}
            _ => return Err(Error::parse(1, format!("expected `{HEADER}`"))),
        }

        let dims = lines.next().ok_or_else(|| Error::parse(2, "missing `N <int> K <int>`"))?;
        let fields: Vec<&str> = dims.split_whitespace().collect();
        let (n_total, k) = match fields.as_slice() {
            ["N", n, "K", k] => (
                n.parse::<usize>()
                    .map_err(|_| Error::parse(2, format!("bad N `{n}`")))?,
                k.parse::<usize>()
                    .map_err(|_| Error::parse(2, format!("bad K `{k}`")))?,
            ),
            _ => return Err(Error::parse(2, "expected `N <int> K <int>`")),
        };
        if log2_block_length(n_total).is_err() || k > n_total {
            return Err(Error::parse(2, format!("invalid code dimensions N {n_total} K {k}")));
        }

        let mask_line = lines.next().ok_or_else(|| Error::parse(3, "missing frozen mask"))?;
        let mask = mask_line
            .strip_prefix("frozen ")
            .ok_or_else(|| Error::parse(3, "expected `frozen <mask>`"))?
            .trim_end();
        if mask.len() != n_total {
            return Err(Error::parse(
                3,
                format!("mask has {} characters, N is {n_total}", mask.len()),
            ));
        }
        let frozen = mask
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::parse(3, format!("unexpected mask character `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        let c = CodeConstruction::new(frozen).map_err(|e| Error::parse(3, e.to_string()))?;
        if c.k() != k {
            return Err(Error::parse(
                3,
                format!("mask freezes {} positions, expected N - K = {}", n_total - c.k(), n_total - k),
            ));
        }
        Ok(c)
    }
}
