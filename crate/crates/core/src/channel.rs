//! BPSK over a real AWGN channel, and the random streams that drive it.
//!
//! `snr_db` is Eb/N0. With code rate `R = K/N` the per-dimension noise variance
//! is `σ² = 1 / (2 · R · 10^(snr_db/10))` and the channel LLR of a received
//! sample `y` is `2y/σ²`, positive when bit 0 is more likely.
//!
//! Randomness is ChaCha8 ([`rand_chacha::ChaCha8Rng`]). Every frame gets its own
//! substream, keyed by the run seed and selected by the frame index through the
//! ChaCha stream id, so frame `i` is the same no matter which worker draws it or
//! in which order frames are simulated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Independent random stream number `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes `tag` into `seed` (SplitMix64 finaliser) to key unrelated stream families.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub rate: f64,
    pub sigma2: f64,
    pub seed: u64,
    /// Skip noise injection; LLRs keep their `2s/σ²` scaling.
    pub noiseless: bool,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Config(format!("code rate {rate} outside (0, 1]")));
        }
        if !snr_db.is_finite() {
            return Err(Error::Config(format!("SNR {snr_db} dB is not finite")));
        }
        Ok(Self {
            snr_db,
            rate,
            sigma2: noise_variance(snr_db, rate),
            seed,
            noiseless: false,
        })
    }

    /// Rate `k / n`, or 1/2 for the degenerate `k = 0` code so the noise level stays defined.
    pub fn for_code(snr_db: f64, n: usize, k: usize, seed: u64) -> Result<Self> {
        let rate = if k == 0 { 0.5 } else { k as f64 / n as f64 };
        Self::new(snr_db, rate, seed)
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }

    /// Random stream for frame (or episode) `index`.
    pub fn frame_rng(&self, index: u64) -> ChaCha8Rng {
        substream(self.seed, index)
    }
}

/// `σ² = 1 / (2 · rate · 10^(snr_db/10))`.
pub fn noise_variance(snr_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(snr_db / 10.0))
}

/// Channel LLRs of one received frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedFrame {
    pub llr: Vec<f64>,
}

impl ReceivedFrame {
    pub fn len(&self) -> usize {
        self.llr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llr.is_empty()
    }
}

/// Maps bit 0 to `+1.0` and bit 1 to `-1.0`.
pub fn modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Adds `N(0, σ²)` noise to each symbol and returns the channel LLRs.
pub fn transmit<R: Rng + ?Sized>(symbols: &[f64], cfg: &ChannelConfig, rng: &mut R) -> ReceivedFrame {
    let sigma = cfg.sigma2.sqrt();
    let scale = 2.0 / cfg.sigma2;
    let llr = symbols
        .iter()
        .map(|&s| {
            let y = if cfg.noiseless {
                s
            } else {
                s + sigma * rng.sample::<f64, _>(StandardNormal)
            };
            scale * y
        })
        .collect();
    ReceivedFrame { llr }
}

/// Transmission of the all-zero codeword, the only word valid for every construction.
pub fn transmit_all_zero<R: Rng + ?Sized>(len: usize, cfg: &ChannelConfig, rng: &mut R) -> ReceivedFrame {
    transmit(&vec![1.0; len], cfg, rng)
}
