use super::{f_min_sum, g_combine, leaf_penalty, DecodeOutcome, SclConfig, Selection};
use crate::channel::ReceivedFrame;
use crate::crc::crc_check;
use crate::polar::{check_bits, log2_block_length, CodeConstruction};
use crate::{Error, Result};

/// Start of layer `m` in the flat per-path tree storage (layer `m` holds `2^m` entries).
#[inline]
fn layer_offset(m: usize) -> usize {
    (1 << m) - 1
}

/// (α storage of layer `m − 1`, α of layer `m`), the root layer being the channel.
fn layer_pair<'a>(alpha: &'a mut [f64], channel: &'a [f64], m: usize, log2_n: usize) -> (&'a mut [f64], &'a [f64]) {
    let half = 1 << (m - 1);
    let dst_off = layer_offset(m - 1);
    if m == log2_n {
        (&mut alpha[dst_off..dst_off + half], channel)
    } else {
        let (lo, hi) = alpha.split_at_mut(layer_offset(m));
        (&mut lo[dst_off..dst_off + half], &hi[..2 * half])
    }
}

/// One surviving SCL path with its own copy of the tree state.
#[derive(Clone, Debug)]
pub struct DecodePath {
    pm: f64,
    u_hat: Vec<u8>,
    /// α of the active node at each layer below the root.
    alpha: Vec<f64>,
    /// β returned by the most recent left child at each layer.
    beta_left: Vec<u8>,
    on_reference: bool,
}

impl DecodePath {
    fn new(len: usize) -> Self {
        Self {
            pm: 0.0,
            u_hat: Vec::with_capacity(len),
            alpha: vec![0.0; len],
            beta_left: vec![0; len],
            on_reference: true,
        }
    }

    pub fn pm(&self) -> f64 {
        self.pm
    }

    pub fn u_hat(&self) -> &[u8] {
        &self.u_hat
    }

    /// Whether every decision so far agrees with the reference word.
    pub fn on_reference(&self) -> bool {
        self.on_reference
    }

    /// Brings α down to leaf `k` and returns it.
    fn leaf_alpha(&mut self, channel: &[f64], k: usize, log2_n: usize) -> f64 {
        let top = if k == 0 {
            log2_n
        } else {
            // Leaf k sits in the right subtree of the node at layer tz(k) + 1;
            // everything above that node is unchanged since leaf k − 1.
            let t = k.trailing_zeros() as usize;
            let half = 1 << t;
            let beta = &self.beta_left[layer_offset(t)..layer_offset(t) + half];
            let (dst, src) = layer_pair(&mut self.alpha, channel, t + 1, log2_n);
            for i in 0..half {
                dst[i] = g_combine(src[i], src[i + half], beta[i]);
            }
            t
        };
        for m in (1..=top).rev() {
            let half = 1 << (m - 1);
            let (dst, src) = layer_pair(&mut self.alpha, channel, m, log2_n);
            for i in 0..half {
                dst[i] = f_min_sum(src[i], src[i + half]);
            }
        }
        self.alpha[0]
    }

    /// Records the decision at leaf `k` and pushes partial sums up the tree.
    fn decide(&mut self, k: usize, bit: u8, log2_n: usize, scratch: &mut [u8]) {
        self.u_hat.push(bit);
        scratch[0] = bit;
        let mut m = 0;
        while m < log2_n {
            let half = 1 << m;
            let off = layer_offset(m);
            if (k >> m) & 1 == 0 {
                self.beta_left[off..off + half].copy_from_slice(&scratch[..half]);
                return;
            }
            for i in 0..half {
                scratch[i + half] = scratch[i];
                scratch[i] ^= self.beta_left[off + i];
            }
            m += 1;
        }
    }
}

/// What happened at one [`SclSession::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub k: usize,
    pub list_len: usize,
    /// `None` when the session has no reference word.
    pub reference_survives: Option<bool>,
}

/// An SCL decoder advanced one leaf at a time.
///
/// The caller decides at each step whether the bit is frozen, which lets the
/// construction game choose the code while decoding it.
#[derive(Clone, Debug)]
pub struct SclSession {
    log2_n: usize,
    channel: Vec<f64>,
    cfg: SclConfig,
    reference: Option<Vec<u8>>,
    paths: Vec<DecodePath>,
    frozen: Vec<bool>,
    reference_alive: bool,
    scratch: Vec<u8>,
    leaf_alphas: Vec<f64>,
    candidates: Vec<(f64, usize, u8)>,
}

impl SclSession {
    /// `reference` is the transmitted input vector `u`, required for genie selection.
    pub fn begin(frame: &ReceivedFrame, cfg: SclConfig, reference: Option<Vec<u8>>) -> Result<Self> {
        let log2_n = log2_block_length(frame.len())?;
        if cfg.list_size == 0 {
            return Err(Error::Config("list size must be at least 1".into()));
        }
        if let Some(r) = &reference {
            if r.len() != frame.len() {
                return Err(Error::InvalidArgument(format!(
                    "reference of length {} for N = {}",
                    r.len(),
                    frame.len()
                )));
            }
            check_bits(r)?;
        } else if cfg.selection == Selection::Genie {
            return Err(Error::Config("genie selection needs the transmitted word".into()));
        }
        let len = frame.len();
        Ok(Self {
            log2_n,
            channel: frame.llr.clone(),
            cfg,
            reference_alive: reference.is_some(),
            reference,
            paths: vec![DecodePath::new(len)],
            frozen: Vec::with_capacity(len),
            scratch: vec![0; len],
            leaf_alphas: Vec::with_capacity(cfg.list_size),
            candidates: Vec::with_capacity(2 * cfg.list_size),
        })
    }

    /// Genie session for an all-zero transmission.
    pub fn genie_all_zero(frame: &ReceivedFrame, list_size: usize) -> Result<Self> {
        Self::begin(frame, SclConfig::genie(list_size)?, Some(vec![0; frame.len()]))
    }

    pub fn len(&self) -> usize {
        self.channel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel.is_empty()
    }

    /// Index of the next leaf to decode.
    pub fn next_k(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_complete(&self) -> bool {
        self.frozen.len() == self.len()
    }

    pub fn paths(&self) -> &[DecodePath] {
        &self.paths
    }

    pub fn reference_alive(&self) -> Option<bool> {
        self.reference.as_ref().map(|_| self.reference_alive)
    }

    /// Decodes leaf `k`, either as frozen (every path appends 0) or by forking
    /// every path and keeping the `L` lowest path metrics.
    pub fn step(&mut self, k: usize, treat_as_frozen: bool) -> Result<StepReport> {
        if k != self.next_k() || k >= self.len() {
            return Err(Error::Protocol(format!(
                "step {k} requested, next leaf is {} of {}",
                self.next_k(),
                self.len()
            )));
        }
        let log2_n = self.log2_n;
        let ref_bit = self.reference.as_ref().map(|r| r[k]);

        self.leaf_alphas.clear();
        for path in &mut self.paths {
            let a = path.leaf_alpha(&self.channel, k, log2_n);
            self.leaf_alphas.push(a);
        }

        if treat_as_frozen {
            for (path, &a) in self.paths.iter_mut().zip(&self.leaf_alphas) {
                path.pm += leaf_penalty(a, 0);
                path.on_reference &= ref_bit.is_none_or(|r| r == 0);
                path.decide(k, 0, log2_n, &mut self.scratch);
            }
        } else {
            self.fork_and_prune(k, ref_bit);
        }
        self.frozen.push(treat_as_frozen);

        if self.reference.is_some() {
            self.reference_alive = self.paths.iter().any(|p| p.on_reference);
        }
        Ok(StepReport {
            k,
            list_len: self.paths.len(),
            reference_survives: self.reference_alive(),
        })
    }

    fn fork_and_prune(&mut self, k: usize, ref_bit: Option<u8>) {
        self.candidates.clear();
        for (l, (path, &a)) in self.paths.iter().zip(&self.leaf_alphas).enumerate() {
            for bit in 0..2u8 {
                self.candidates.push((path.pm + leaf_penalty(a, bit), l, bit));
            }
        }
        if self.candidates.len() > self.cfg.list_size {
            // Stable: equal metrics keep creation order (parent position, then bit).
            self.candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            self.candidates.truncate(self.cfg.list_size);
        }

        let mut uses = vec![0usize; self.paths.len()];
        for &(_, l, _) in &self.candidates {
            uses[l] += 1;
        }
        let mut parents: Vec<Option<DecodePath>> = std::mem::take(&mut self.paths).into_iter().map(Some).collect();
        for &(pm, l, bit) in &self.candidates {
            uses[l] -= 1;
            let mut child = if uses[l] > 0 {
                parents[l].clone().expect("parent still owned")
            } else {
                parents[l].take().expect("parent used once more")
            };
            child.pm = pm;
            child.on_reference &= ref_bit.is_none_or(|r| r == bit);
            child.decide(k, bit, self.log2_n, &mut self.scratch);
            self.paths.push(child);
        }
    }

    fn info_bits(&self, path: &DecodePath) -> Vec<u8> {
        path.u_hat
            .iter()
            .zip(&self.frozen)
            .filter(|(_, &f)| !f)
            .map(|(&b, _)| b)
            .collect()
    }

    /// Picks the output codeword according to the configured selection rule.
    pub fn finalize(self) -> Result<DecodeOutcome> {
        if !self.is_complete() {
            return Err(Error::Protocol(format!(
                "finalize after {} of {} steps",
                self.next_k(),
                self.len()
            )));
        }
        // Lowest PM first; ties keep list order.
        let mut order: Vec<usize> = (0..self.paths.len()).collect();
        order.sort_by(|&a, &b| self.paths[a].pm.total_cmp(&self.paths[b].pm));
        let best = order[0];

        let (selected, crc_failed) = match self.cfg.selection {
            Selection::Pure => (best, false),
            Selection::CrcAided(spec) => match order
                .iter()
                .copied()
                .find(|&l| crc_check(&self.info_bits(&self.paths[l]), &spec))
            {
                Some(l) => (l, false),
                None => (best, true),
            },
            Selection::Genie => (
                self.paths.iter().position(|p| p.on_reference).unwrap_or(best),
                false,
            ),
        };

        let path = &self.paths[selected];
        let genie_survived = self.reference.is_some() && self.reference_alive;
        let frame_error = match self.cfg.selection {
            Selection::Genie => !genie_survived,
            _ => crc_failed || self.reference.as_ref().is_some_and(|r| path.u_hat != *r),
        };
        Ok(DecodeOutcome {
            decoded: self.info_bits(path),
            u_hat: path.u_hat.clone(),
            frame_error,
            genie_survived,
            pm_of_selected: path.pm,
        })
    }
}

/// Whole-frame SCL decoding of a fixed construction.
pub fn scl_decode(
    frame: &ReceivedFrame,
    c: &CodeConstruction,
    cfg: SclConfig,
    reference: Option<Vec<u8>>,
) -> Result<DecodeOutcome> {
    if frame.len() != c.len() {
        return Err(Error::InvalidArgument(format!(
            "frame of length {} for N = {}",
            frame.len(),
            c.len()
        )));
    }
    let mut session = SclSession::begin(frame, cfg, reference)?;
    for k in 0..c.len() {
        session.step(k, c.is_frozen(k))?;
    }
    session.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{modulate, transmit, ChannelConfig};
    use crate::crc::{crc_append, CrcSpec};
    use crate::decoder::sc_decode;
    use proptest::prelude::*;
    use rand::Rng;

    fn noisy_frame(c: &CodeConstruction, snr_db: f64, seed: u64, index: u64) -> (Vec<u8>, ReceivedFrame) {
        let cfg = ChannelConfig::for_code(snr_db, c.len(), c.k(), seed).unwrap();
        let mut rng = cfg.frame_rng(index);
        let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..=1)).collect();
        let u = c.place(&info).unwrap();
        let x = c.encode(&info).unwrap();
        (u, transmit(&modulate(&x), &cfg, &mut rng))
    }

    #[test]
    fn pm_follows_leaf_sign() {
        // N = 2: leaf 0 sees f(3, 1) = 1.
        let frame = ReceivedFrame { llr: vec![3.0, 1.0] };
        let mut s = SclSession::begin(&frame, SclConfig::pure(4).unwrap(), None).unwrap();
        s.step(0, false).unwrap();
        let pms: Vec<f64> = s.paths().iter().map(|p| p.pm()).collect();
        assert_eq!(pms, vec![0.0, 1.0]);
    }

    #[test]
    fn frozen_leaves_are_penalised() {
        let frame = ReceivedFrame { llr: vec![-3.0, 1.0] };
        let mut s = SclSession::begin(&frame, SclConfig::pure(4).unwrap(), None).unwrap();
        s.step(0, true).unwrap();
        assert_eq!(s.paths()[0].pm(), 1.0);
    }

    #[test]
    fn list_grows_then_caps() {
        let frame = ReceivedFrame { llr: vec![0.5, -1.0, 2.0, 0.3, -0.2, 1.1, 0.9, -0.7] };
        let mut s = SclSession::begin(&frame, SclConfig::pure(2).unwrap(), None).unwrap();
        let r0 = s.step(0, true).unwrap();
        assert_eq!(r0.list_len, 1);
        assert_eq!(s.step(1, false).unwrap().list_len, 2);
        assert_eq!(s.step(2, false).unwrap().list_len, 2);
        assert_eq!(r0.reference_survives, None);
    }

    #[test]
    fn out_of_order_step_is_rejected() {
        let frame = ReceivedFrame { llr: vec![1.0; 4] };
        let mut s = SclSession::genie_all_zero(&frame, 2).unwrap();
        assert!(matches!(s.step(1, false), Err(Error::Protocol(_))));
        s.step(0, false).unwrap();
        assert!(matches!(s.step(0, false), Err(Error::Protocol(_))));
        assert!(matches!(s.clone().finalize(), Err(Error::Protocol(_))));
    }

    #[test]
    fn genie_needs_reference() {
        let frame = ReceivedFrame { llr: vec![1.0; 4] };
        assert!(matches!(
            SclSession::begin(&frame, SclConfig::genie(2).unwrap(), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn noiseless_genie_survives() {
        let c = CodeConstruction::from_info_positions(16, &[7, 9, 10, 11, 12, 13, 14, 15]).unwrap();
        let frame = ReceivedFrame { llr: vec![4.0; 16] };
        let out = scl_decode(&frame, &c, SclConfig::genie(2).unwrap(), Some(vec![0; 16])).unwrap();
        assert!(out.genie_survived);
        assert!(!out.frame_error);
        assert_eq!(out.pm_of_selected, 0.0);
    }

    #[test]
    fn crc_failure_is_frame_error() {
        // L = 1 over a clean frame carrying a word whose check bits are wrong:
        // the only path fails the CRC.
        let c = CodeConstruction::from_info_positions(8, &[3, 4, 5, 6, 7]).unwrap();
        let crc = CrcSpec::standard(4).unwrap();
        let cfg = SclConfig::crc_aided(1, crc).unwrap();
        let info = [1, 0, 0, 0, 1];
        assert!(!crc_check(&info, &crc));
        let x = c.encode(&info).unwrap();
        let frame = ReceivedFrame { llr: modulate(&x).iter().map(|s| 5.0 * s).collect() };
        let out = scl_decode(&frame, &c, cfg, None).unwrap();
        assert!(out.frame_error);
        assert_eq!(out.decoded, info);
    }

    #[test]
    fn crc_aided_picks_passing_path() {
        let c = CodeConstruction::from_info_positions(16, &[6, 7, 9, 10, 11, 12, 13, 14, 15]).unwrap();
        let crc = CrcSpec::standard(4).unwrap();
        let info = crc_append(&[1, 0, 1, 1, 0], &crc);
        let x = c.encode(&info).unwrap();
        let frame = ReceivedFrame { llr: modulate(&x).iter().map(|s| 3.0 * s).collect() };
        let out = scl_decode(&frame, &c, SclConfig::crc_aided(4, crc).unwrap(), Some(c.place(&info).unwrap())).unwrap();
        assert!(!out.frame_error);
        assert_eq!(out.decoded, info);
    }

    #[test]
    fn list_of_one_matches_sc() {
        let c = CodeConstruction::from_info_positions(32, &(16..32).collect::<Vec<_>>()).unwrap();
        for i in 0..2000 {
            let (_, frame) = noisy_frame(&c, 1.0, 5, i);
            let sc = sc_decode(&frame, &c).unwrap();
            let scl = scl_decode(&frame, &c, SclConfig::pure(1).unwrap(), None).unwrap();
            assert_eq!(sc.u_hat, scl.u_hat, "frame {i}");
            assert_eq!(sc.pm_of_selected, scl.pm_of_selected);
        }
    }

    #[test]
    fn genie_drop_is_absorbing() {
        let c = CodeConstruction::from_info_positions(64, &(24..64).collect::<Vec<_>>()).unwrap();
        let cfg = ChannelConfig::for_code(0.0, 64, 40, 17).unwrap();
        let mut drops = 0;
        for i in 0..500 {
            let frame = crate::channel::transmit_all_zero(64, &cfg, &mut cfg.frame_rng(i));
            let mut s = SclSession::genie_all_zero(&frame, 2).unwrap();
            let mut dropped = false;
            for k in 0..64 {
                let alive = s.step(k, c.is_frozen(k)).unwrap().reference_survives.unwrap();
                assert!(!(dropped && alive), "reference reappeared at {k}");
                if !alive && !dropped {
                    dropped = true;
                    assert!(!c.is_frozen(k), "frozen step dropped the reference");
                }
            }
            drops += usize::from(dropped);
            assert_eq!(s.finalize().unwrap().frame_error, dropped);
        }
        assert!(drops > 0);
    }

    /// Exhaustive search over all `2^K` codewords for the best correlation `Σ llr_i (1 − 2x_i)`.
    fn ml_codeword(c: &CodeConstruction, llr: &[f64]) -> (f64, Vec<u8>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for w in 0u32..(1 << c.k()) {
            let info: Vec<u8> = (0..c.k()).map(|i| ((w >> i) & 1) as u8).collect();
            let x = c.encode(&info).unwrap();
            let corr: f64 = llr.iter().zip(&x).map(|(l, &b)| if b == 0 { *l } else { -l }).sum();
            if corr > best.0 {
                best = (corr, x);
            }
        }
        best
    }

    fn correlation(llr: &[f64], x: &[u8]) -> f64 {
        llr.iter().zip(x).map(|(l, &b)| if b == 0 { *l } else { -l }).sum()
    }

    #[test]
    fn full_list_is_maximum_likelihood() {
        let c = CodeConstruction::from_info_positions(8, &[3, 5, 6, 7]).unwrap();
        for i in 0..2000 {
            let (_, frame) = noisy_frame(&c, 2.0, 9, i);
            let out = scl_decode(&frame, &c, SclConfig::pure(16).unwrap(), None).unwrap();
            let x = crate::polar::polar_transform(&out.u_hat).unwrap();
            let (ml, _) = ml_codeword(&c, &frame.llr);
            assert!((correlation(&frame.llr, &x) - ml).abs() < 1e-9, "frame {i}");
        }
    }

    proptest! {
        #[test]
        fn path_metrics_never_decrease(llr in proptest::collection::vec(-6.0f64..6.0, 16), mask in proptest::collection::vec(any::<bool>(), 16), list in 1usize..6) {
            let mut s = SclSession::begin(&ReceivedFrame { llr }, SclConfig::pure(list).unwrap(), None).unwrap();
            let mut floor = 0.0;
            for (k, &f) in mask.iter().enumerate() {
                s.step(k, f).unwrap();
                let min = s.paths().iter().map(|p| p.pm()).fold(f64::INFINITY, f64::min);
                prop_assert!(min >= floor);
                prop_assert!(s.paths().len() <= list);
                floor = min;
            }
        }

        #[test]
        fn full_list_attains_min_pm(llr in proptest::collection::vec(-5.0f64..5.0, 16), info in proptest::sample::subsequence((0..16usize).collect::<Vec<_>>(), 0..=6)) {
            let c = CodeConstruction::from_info_positions(16, &info).unwrap();
            let out = scl_decode(&ReceivedFrame { llr: llr.clone() }, &c, SclConfig::pure(1 << c.k()).unwrap(), None).unwrap();
            // The minimum-PM codeword is the maximum-correlation codeword.
            let x = crate::polar::polar_transform(&out.u_hat).unwrap();
            let (ml, _) = ml_codeword(&c, &llr);
            prop_assert!((correlation(&llr, &x) - ml).abs() < 1e-9);
        }
    }
}
