//! Monte-Carlo reliability construction.
//!
//! Every frame carries the all-zero codeword. A genie-aided SC decoder feeds
//! the true bit (zero) back at every leaf, so the error event at bit `k` is
//! just `α_k < 0` and bit errors do not propagate. The `K` bits with the
//! fewest errors become the information set.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::bench::with_workers;
use crate::channel::{transmit_all_zero, ChannelConfig};
use crate::decoder::sc_traverse;
use crate::polar::{log2_block_length, CodeConstruction};
use crate::{Error, Result};

/// Fewest frames accepted by [`mc_reliability`].
pub const MIN_FRAMES: u64 = 10_000;
const CHUNK_FRAMES: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityProfile {
    /// Estimated error probability of bit `k` under genie-aided SC.
    pub per_bit_error: Vec<f64>,
    pub frames_used: u64,
}

impl ReliabilityProfile {
    pub fn len(&self) -> usize {
        self.per_bit_error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_bit_error.is_empty()
    }

    /// `reliability v1` then one `k p_err` line per bit.
    pub fn to_text(&self) -> String {
        let mut out = format!("reliability v1 N {} frames {}\n", self.len(), self.frames_used);
        for (k, p) in self.per_bit_error.iter().enumerate() {
            writeln!(out, "{k} {p:?}").expect("writing to a String");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Counts per-bit genie-aided SC errors over `frames` all-zero transmissions.
///
/// Frame `i` uses substream `i` of the channel seed, so the profile does not
/// depend on `workers`.
pub fn mc_reliability(
    n_total: usize,
    channel: &ChannelConfig,
    frames: u64,
    workers: Option<usize>,
) -> Result<ReliabilityProfile> {
    log2_block_length(n_total)?;
    if frames < MIN_FRAMES {
        return Err(Error::Config(format!("need at least {MIN_FRAMES} frames, got {frames}")));
    }
    let chunks: Vec<u64> = (0..frames.div_ceil(CHUNK_FRAMES)).collect();
    let counts = with_workers(workers, || {
        chunks
            .par_iter()
            .map(|&c| {
                let mut counts = vec![0u64; n_total];
                for i in c * CHUNK_FRAMES..((c + 1) * CHUNK_FRAMES).min(frames) {
                    let frame = transmit_all_zero(n_total, channel, &mut channel.frame_rng(i));
                    sc_traverse(&frame.llr, &mut |k, alpha| {
                        counts[k] += u64::from(alpha < 0.0);
                        0
                    })
                    .expect("length checked above");
                }
                counts
            })
            .reduce(
                || vec![0u64; n_total],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });
    Ok(ReliabilityProfile {
        per_bit_error: counts.iter().map(|&c| c as f64 / frames as f64).collect(),
        frames_used: frames,
    })
}

/// Information set = the `k` least error-prone bits; ties go to the larger index.
pub fn construct_top_k(profile: &ReliabilityProfile, k: usize) -> Result<CodeConstruction> {
    let n = profile.len();
    if k > n {
        return Err(Error::InvalidArgument(format!("K = {k} exceeds N = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        profile.per_bit_error[a]
            .total_cmp(&profile.per_bit_error[b])
            .then(b.cmp(&a))
    });
    CodeConstruction::from_info_positions(n, &order[..k])
}
