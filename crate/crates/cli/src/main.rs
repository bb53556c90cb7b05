//! `polarmaze`: train constructions, build the reliability baseline, measure FER.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polarmaze::agent::{default_lambda, extract_construction, train, TrainConfig};
use polarmaze::baseline::{construct_top_k, mc_reliability, MIN_FRAMES};
use polarmaze::bench::{snr_grid, sweep, write_csv, DecoderKind, DecoderSpec, FerOptions, DEFAULT_MAX_FRAMES, DEFAULT_MIN_ERRORS};
use polarmaze::channel::ChannelConfig;
use polarmaze::crc::CrcSpec;
use polarmaze::CodeConstruction;

#[derive(Parser, Debug)]
#[command(name = "polarmaze", version, about = "Polar code construction by reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a construction with SARSA(λ) at one SNR.
    Train(TrainArgs),
    /// Learn one construction per SNR point.
    TrainSweep(TrainSweepArgs),
    /// Build the Monte-Carlo reliability construction.
    Baseline(BaselineArgs),
    /// Measure frame error rate over an SNR range and write a CSV.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Clone)]
struct AgentArgs {
    /// Block length N (power of two).
    #[arg(long)]
    n: usize,
    /// Number of information bits K.
    #[arg(long)]
    k: usize,
    /// List size of the genie decoder that produces rewards.
    #[arg(long, default_value_t = 1)]
    list_size: usize,
    /// Training episodes.
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    /// Trace decay λ [default: 0.3 for N ≤ 32, else 0.75].
    #[arg(long)]
    lambda: Option<f64>,
    /// Discount γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Learning rate ρ.
    #[arg(long, default_value_t = 0.05)]
    rho: f64,
    /// Initial exploration rate.
    #[arg(long, default_value_t = 0.3)]
    eps0: f64,
    /// Exploration floor.
    #[arg(long, default_value_t = 0.01)]
    eps_min: f64,
    /// Per-episode exploration decay [default: reaches --eps-min at 60% of episodes].
    #[arg(long)]
    eps_decay: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the construction, Q-table and training log.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Eb/N0 in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    #[command(flatten)]
    agent: AgentArgs,
}

#[derive(Args, Debug)]
struct TrainSweepArgs {
    #[command(flatten)]
    snr: SnrRange,
    #[command(flatten)]
    agent: AgentArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct SnrRange {
    /// First Eb/N0 point in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_start: f64,
    /// Last Eb/N0 point in dB [default: --snr-start].
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    snr_step: f64,
}

impl SnrRange {
    fn points(&self) -> polarmaze::Result<Vec<f64>> {
        snr_grid(self.snr_start, self.snr_stop.unwrap_or(self.snr_start), self.snr_step)
    }
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Eb/N0 in dB, at rate K/N.
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    /// Monte-Carlo frames (at least 10000).
    #[arg(long, default_value_t = 1_000_000)]
    frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Construction output file.
    #[arg(long, default_value = "construction.txt")]
    out: PathBuf,
    /// Also write the per-bit error estimates here.
    #[arg(long)]
    dump_reliability: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Construction file; its K counts CRC bits for cascl.
    #[arg(long)]
    construction: PathBuf,
    /// sc, scl, cascl or genie.
    #[arg(long)]
    decoder: DecoderKind,
    #[arg(long, default_value_t = 1)]
    list_size: usize,
    /// CRC width (4, 8 or 16); required for cascl.
    #[arg(long)]
    crc_width: Option<usize>,
    /// CRC generator in hex, without the leading x^P term [default: standard for the width].
    #[arg(long, value_parser = parse_hex)]
    crc_poly: Option<u64>,
    #[command(flatten)]
    snr: SnrRange,
    #[arg(long, default_value_t = DEFAULT_MIN_ERRORS)]
    min_errors: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_FRAMES)]
    max_frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output file.
    #[arg(long, default_value = "fer.csv")]
    out: PathBuf,
    /// Worker threads [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s.trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(digits, 16).map_err(|e| format!("`{s}` is not hex: {e}"))
}

enum Failure {
    Usage(String),
    Runtime(polarmaze::Error),
}

impl From<polarmaze::Error> for Failure {
    fn from(e: polarmaze::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage<T>(r: polarmaze::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::TrainSweep(a) => cmd_train_sweep(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Eval(a) => cmd_eval(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn train_config(a: &AgentArgs, snr_db: f64) -> Result<TrainConfig, Failure> {
    let mut cfg = TrainConfig::new(a.n, a.k, snr_db, a.list_size, a.episodes, a.seed);
    cfg.lambda = a.lambda.unwrap_or_else(|| default_lambda(a.n));
    cfg.gamma = a.gamma;
    cfg.rho = a.rho;
    cfg.eps0 = a.eps0;
    cfg.eps_min = a.eps_min;
    cfg.eps_decay = a.eps_decay;
    usage(cfg.validate())?;
    cfg.eps_decay = Some(cfg.resolved_eps_decay());
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(polarmaze::Error::io(dir, e)))
}

fn run_training(cfg: &TrainConfig, dir: &Path, suffix: &str) -> Result<(), Failure> {
    let (q, log) = train(cfg)?;
    let c = extract_construction(&q);
    let construction = dir.join(format!("construction{suffix}.txt"));
    c.save(&construction)?;
    q.save(dir.join(format!("qtable{suffix}.txt")))?;
    log.save(dir.join(format!("train_log{suffix}.csv")))?;
    eprintln!(
        "snr {} dB: nonfrozen {:?}, mean return over last 10% {:.4} -> {}",
        cfg.snr_db,
        c.info_positions(),
        log.tail_mean_return(cfg.episodes.div_ceil(10)),
        construction.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let cfg = train_config(&a.agent, a.snr)?;
    eprintln!("train: {cfg:?}, out_dir {:?}", a.agent.out_dir);
    create_dir(&a.agent.out_dir)?;
    run_training(&cfg, &a.agent.out_dir, "")
}

fn cmd_train_sweep(a: &TrainSweepArgs) -> Result<(), Failure> {
    let snrs = usage(a.snr.points())?;
    let cfgs = snrs
        .iter()
        .map(|&snr| train_config(&a.agent, snr))
        .collect::<Result<Vec<_>, _>>()?;
    eprintln!("train-sweep: snr points {snrs:?}, {:?}, out_dir {:?}", cfgs[0], a.agent.out_dir);
    create_dir(&a.agent.out_dir)?;
    for cfg in &cfgs {
        run_training(cfg, &a.agent.out_dir, &format!("_snr{}", cfg.snr_db))?;
    }
    Ok(())
}

fn cmd_baseline(a: &BaselineArgs) -> Result<(), Failure> {
    if a.frames < MIN_FRAMES {
        return Err(Failure::Usage(format!("--frames must be at least {MIN_FRAMES}")));
    }
    if a.k > a.n {
        return Err(Failure::Usage(format!("--k {} exceeds --n {}", a.k, a.n)));
    }
    usage(polarmaze::polar::log2_block_length(a.n))?;
    let channel = usage(ChannelConfig::for_code(a.snr, a.n, a.k, a.seed))?;
    eprintln!("baseline: {a:?}, {channel:?}");
    let profile = mc_reliability(a.n, &channel, a.frames, a.workers)?;
    let c = construct_top_k(&profile, a.k)?;
    c.save(&a.out)?;
    if let Some(path) = &a.dump_reliability {
        profile.save(path)?;
    }
    eprintln!("nonfrozen {:?} -> {}", c.info_positions(), a.out.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let crc = match (a.crc_width, a.crc_poly) {
        (None, Some(_)) => return Err(Failure::Usage("--crc-poly needs --crc-width".into())),
        (None, None) => None,
        (Some(w), None) => Some(usage(CrcSpec::standard(w))?),
        (Some(w), Some(p)) => Some(usage(CrcSpec::new(w, p, 0))?),
    };
    let crc = crc.filter(|c| c.width() > 0);
    let dec = usage(DecoderSpec::new(a.decoder, a.list_size, crc))?;
    let snrs = usage(a.snr.points())?;
    if a.max_frames == 0 {
        return Err(Failure::Usage("--max-frames must be at least 1".into()));
    }
    if a.workers == Some(0) {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    let c = CodeConstruction::load(&a.construction)?;
    if let Some(spec) = &crc {
        if spec.width() >= c.k() {
            return Err(Failure::Usage(format!("K = {} leaves no room for a {}-bit CRC", c.k(), spec.width())));
        }
    }
    let opts = FerOptions { min_errors: a.min_errors, max_frames: a.max_frames, seed: a.seed, workers: a.workers };
    eprintln!("eval: {a:?}, N {} K {}, {dec:?}, snr points {snrs:?}", c.len(), c.k());
    let results = sweep(&c, &dec, &snrs, &opts)?;
    for r in &results {
        eprintln!("{}", r.csv_row());
    }
    write_csv(&results, &a.out)?;
    Ok(())
}
