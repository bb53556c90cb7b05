//! Monte-Carlo frame-error-rate estimation.
//!
//! Frame `i` at a given SNR always sees the same information word and noise:
//! its random stream is substream `i` of a key derived from the run seed and
//! the SNR value. Frames are simulated in batches of [`BATCH_FRAMES`] and the
//! stopping rule is only checked between batches, so the result does not
//! depend on the number of workers. Different decoders and list sizes run at
//! the same seed and SNR therefore see common random numbers.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{derive_seed, modulate, transmit, ChannelConfig};
use crate::crc::{crc_append, CrcSpec};
use crate::decoder::{sc_decode, scl_decode, SclConfig, Selection};
use crate::polar::CodeConstruction;
use crate::{Error, Result};

/// Frames per batch; the error-count stopping rule is evaluated at batch boundaries.
pub const BATCH_FRAMES: u64 = 1000;
pub const DEFAULT_MIN_ERRORS: u64 = 500;
pub const DEFAULT_MAX_FRAMES: u64 = 10_000_000;

const Z_95: f64 = 1.959_963_984_540_054;
pub const CSV_HEADER: &str = "snr_db,decoder,list_size,frames,errors,fer,ci_low,ci_high";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Sc,
    Scl,
    CaScl,
    Genie,
}

impl DecoderKind {
    pub fn label(self) -> &'static str {
        match self {
            DecoderKind::Sc => "sc",
            DecoderKind::Scl => "scl",
            DecoderKind::CaScl => "cascl",
            DecoderKind::Genie => "genie",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(DecoderKind::Sc),
            "scl" => Ok(DecoderKind::Scl),
            "cascl" => Ok(DecoderKind::CaScl),
            "genie" => Ok(DecoderKind::Genie),
            other => Err(Error::Config(format!("unknown decoder `{other}`"))),
        }
    }
}

/// Decoder under test. The CRC is present exactly for [`DecoderKind::CaScl`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderSpec {
    kind: DecoderKind,
    list_size: usize,
    crc: Option<CrcSpec>,
}

impl DecoderSpec {
    pub fn sc() -> Self {
        Self { kind: DecoderKind::Sc, list_size: 1, crc: None }
    }

    pub fn scl(list_size: usize) -> Result<Self> {
        Self::new(DecoderKind::Scl, list_size, None)
    }

    pub fn genie(list_size: usize) -> Result<Self> {
        Self::new(DecoderKind::Genie, list_size, None)
    }

    pub fn cascl(list_size: usize, crc: CrcSpec) -> Result<Self> {
        Self::new(DecoderKind::CaScl, list_size, Some(crc))
    }

    pub fn new(kind: DecoderKind, list_size: usize, crc: Option<CrcSpec>) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::Config("list size must be at least 1".into()));
        }
        match (kind, crc) {
            (DecoderKind::CaScl, None) => Err(Error::Config("CA-SCL needs a CRC".into())),
            (DecoderKind::CaScl, Some(_)) => Ok(Self { kind, list_size, crc }),
            (_, Some(_)) => Err(Error::Config(format!("a CRC only applies to cascl, not {kind}"))),
            (DecoderKind::Sc, None) if list_size != 1 => Err(Error::Config("SC has list size 1".into())),
            _ => Ok(Self { kind, list_size, crc }),
        }
    }

    pub fn kind(&self) -> DecoderKind {
        self.kind
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn crc(&self) -> Option<CrcSpec> {
        self.crc
    }

    fn crc_width(&self) -> usize {
        self.crc.map_or(0, |c| c.width())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FerOptions {
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl Default for FerOptions {
    fn default() -> Self {
        Self {
            min_errors: DEFAULT_MIN_ERRORS,
            max_frames: DEFAULT_MAX_FRAMES,
            seed: 0,
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FerResult {
    pub snr_db: f64,
    pub decoder: DecoderKind,
    pub list_size: usize,
    pub frames: u64,
    pub errors: u64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// No errors were seen, so only the upper bound is informative.
    pub unresolved: bool,
}

impl FerResult {
    fn new(snr_db: f64, dec: &DecoderSpec, frames: u64, errors: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, frames);
        Self {
            snr_db,
            decoder: dec.kind,
            list_size: dec.list_size,
            frames,
            errors,
            fer: if frames == 0 { 0.0 } else { errors as f64 / frames as f64 },
            ci_low,
            ci_high,
            unresolved: errors == 0,
        }
    }

    /// Binomial standard error of the point estimate.
    pub fn std_error(&self) -> f64 {
        (self.fer * (1.0 - self.fer) / self.frames.max(1) as f64).sqrt()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.snr_db, self.decoder, self.list_size, self.frames, self.errors, self.fer, self.ci_low, self.ci_high
        )
    }
}

/// 95% Wilson score interval for `errors` out of `frames`.
pub fn wilson_interval(errors: u64, frames: u64) -> (f64, f64) {
    if frames == 0 {
        return (0.0, 1.0);
    }
    let n = frames as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Channel used for `c` at `snr_db`; the rate counts CRC bits as part of `K`.
pub fn channel_for(c: &CodeConstruction, snr_db: f64, seed: u64) -> Result<ChannelConfig> {
    ChannelConfig::for_code(snr_db, c.len(), c.k(), derive_seed(seed, snr_db.to_bits()))
}

/// Simulates frame `index` and reports whether it was decoded in error.
pub fn simulate_frame(c: &CodeConstruction, dec: &DecoderSpec, channel: &ChannelConfig, index: u64) -> Result<bool> {
    let mut rng = channel.frame_rng(index);
    let payload_len = c
        .k()
        .checked_sub(dec.crc_width())
        .filter(|&a| a > 0 || dec.crc.is_none())
        .ok_or_else(|| Error::Config(format!("K = {} leaves no room for {} CRC bits", c.k(), dec.crc_width())))?;
    let payload: Vec<u8> = (0..payload_len).map(|_| rng.random_range(0..=1u8)).collect();
    let info = match &dec.crc {
        Some(spec) => crc_append(&payload, spec),
        None => payload,
    };
    let u = c.place(&info)?;
    let x = c.encode(&info)?;
    let frame = transmit(&modulate(&x), channel, &mut rng);

    let selection = match dec.kind {
        DecoderKind::Sc => return Ok(sc_decode(&frame, c)?.decoded != info),
        DecoderKind::Scl => Selection::Pure,
        DecoderKind::CaScl => Selection::CrcAided(dec.crc.expect("validated")),
        DecoderKind::Genie => Selection::Genie,
    };
    let out = scl_decode(&frame, c, SclConfig::new(dec.list_size, selection)?, Some(u))?;
    Ok(out.frame_error)
}

/// Per-frame error flags for frames `range`, e.g. to compare decoders frame by frame.
pub fn frame_errors(
    c: &CodeConstruction,
    dec: &DecoderSpec,
    channel: &ChannelConfig,
    range: std::ops::Range<u64>,
    workers: Option<usize>,
) -> Result<Vec<bool>> {
    with_workers(workers, || {
        range
            .into_par_iter()
            .map(|i| simulate_frame(c, dec, channel, i))
            .collect::<Result<Vec<bool>>>()
    })
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Simulates until `min_errors` frame errors or `max_frames` frames, checked per batch.
pub fn estimate_fer(c: &CodeConstruction, dec: &DecoderSpec, snr_db: f64, opts: &FerOptions) -> Result<FerResult> {
    if opts.max_frames == 0 {
        return Err(Error::Config("max_frames must be at least 1".into()));
    }
    let channel = channel_for(c, snr_db, opts.seed)?;
    let (mut frames, mut errors) = (0u64, 0u64);
    with_workers(opts.workers, || -> Result<()> {
        while frames < opts.max_frames && errors < opts.min_errors.max(1) {
            let end = (frames + BATCH_FRAMES).min(opts.max_frames);
            let batch: u64 = (frames..end)
                .into_par_iter()
                .map(|i| simulate_frame(c, dec, &channel, i).map(u64::from))
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            errors += batch;
            frames = end;
        }
        Ok(())
    })?;
    Ok(FerResult::new(snr_db, dec, frames, errors))
}

/// One [`estimate_fer`] per SNR point.
pub fn sweep(c: &CodeConstruction, dec: &DecoderSpec, snrs: &[f64], opts: &FerOptions) -> Result<Vec<FerResult>> {
    if snrs.is_empty() {
        return Err(Error::Config("empty SNR list".into()));
    }
    snrs.iter().map(|&snr| estimate_fer(c, dec, snr, opts)).collect()
}

/// `start, start + step, …` up to and including `stop` (within rounding).
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!("bad SNR range {start}..{stop} step {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Rounded to 1e-9 dB so grids print cleanly.
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

pub fn to_csv(results: &[FerResult]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in results {
        writeln!(out, "{}", r.csv_row()).expect("writing to a String");
    }
    out
}

pub fn write_csv(results: &[FerResult], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), to_csv(results)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rm_like() -> CodeConstruction {
        CodeConstruction::from_info_positions(8, &[3, 5, 6, 7]).unwrap()
    }

    #[test]
    fn wilson_properties() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        for (e, n) in [(1, 10), (500, 10_000), (9, 9), (37, 123_456)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        let w1 = wilson_interval(100, 10_000);
        let w4 = wilson_interval(400, 40_000);
        assert!(((w1.1 - w1.0) / (w4.1 - w4.0) - 2.0).abs() < 0.05);
    }

    #[test]
    fn decoder_spec_validation() {
        assert!(DecoderSpec::new(DecoderKind::CaScl, 4, None).is_err());
        assert!(DecoderSpec::new(DecoderKind::Genie, 4, Some(CrcSpec::standard(8).unwrap())).is_err());
        assert!(DecoderSpec::scl(0).is_err());
        assert_eq!("cascl".parse::<DecoderKind>().unwrap(), DecoderKind::CaScl);
        assert!("ml".parse::<DecoderKind>().is_err());
    }

    #[test]
    fn all_frozen_genie_never_fails() {
        let c = CodeConstruction::new(vec![true; 16]).unwrap();
        let opts = FerOptions { max_frames: 3000, ..Default::default() };
        let r = estimate_fer(&c, &DecoderSpec::genie(2).unwrap(), -3.0, &opts).unwrap();
        assert_eq!((r.frames, r.errors, r.fer), (3000, 0, 0.0));
        assert!(r.unresolved);
    }

    #[test]
    fn stops_on_error_count_at_batch_boundary() {
        let opts = FerOptions { min_errors: 50, max_frames: 1_000_000, seed: 3, workers: Some(1) };
        let r = estimate_fer(&rm_like(), &DecoderSpec::sc(), 0.0, &opts).unwrap();
        assert!(r.errors >= 50);
        assert_eq!(r.frames % BATCH_FRAMES, 0);
        let again = estimate_fer(&rm_like(), &DecoderSpec::sc(), 0.0, &FerOptions { workers: Some(3), ..opts }).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn single_point_sweep_equals_estimate() {
        let opts = FerOptions { min_errors: 20, max_frames: 20_000, seed: 1, workers: None };
        let dec = DecoderSpec::scl(2).unwrap();
        let one = estimate_fer(&rm_like(), &dec, 1.5, &opts).unwrap();
        let sw = sweep(&rm_like(), &dec, &[1.5], &opts).unwrap();
        assert_eq!(sw, vec![one]);
        let csv = to_csv(&sweep(&rm_like(), &dec, &[0.0, 1.0, 2.0], &opts).unwrap());
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn grid() {
        assert_eq!(snr_grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(snr_grid(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert_eq!(snr_grid(0.0, 0.3, 0.1).unwrap().len(), 4);
        assert!(snr_grid(1.0, 0.0, 0.5).is_err());
        assert!(sweep(&rm_like(), &DecoderSpec::sc(), &[], &FerOptions::default()).is_err());
    }

    #[test]
    fn crc_needs_room() {
        let c = CodeConstruction::from_info_positions(8, &[5, 6, 7]).unwrap();
        let dec = DecoderSpec::cascl(2, CrcSpec::standard(4).unwrap()).unwrap();
        assert!(estimate_fer(&c, &dec, 1.0, &FerOptions { max_frames: 10, ..Default::default() }).is_err());
    }
}
