//! Command-line surface: embed, extract, channel, attack, bench, analyze.
//!
//! Reports are JSON, bench tables are CSV plus a human-readable listing, and
//! every command is deterministic once seeds are fixed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{frame_aligned_ber, random_payload};
use crate::channel::{apply_attack, simulate_daad, AttackSpec, ChannelSpec};
use crate::embed::{embed, EmbedConfig};
use crate::error::{Error, Result};
use crate::extract::{extract_with, ExtractOptions};
use crate::metrics::{capacity, snr};
use crate::sync::{false_negative_prob, false_positive_prob};
use crate::wav::{read_wav, write_wav, AudioBuffer};

#[derive(Debug, Parser)]
#[command(name = "wavemark", version, about = "Blind DWT audio watermarking toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed payload bits into a WAV file.
    Embed(EmbedArgs),
    /// Recover payload bits from a watermarked WAV file.
    Extract(ExtractArgs),
    /// Pass a WAV file through the simulated DA/AD channel.
    Channel(ChannelArgs),
    /// Apply one signal-processing attack to a WAV file.
    Attack(AttackArgs),
    /// Embed, attack, and extract over a corpus directory; tabulate BER.
    Bench(BenchArgs),
    /// Print capacity and sync-code error-probability tables.
    Analyze(AnalyzeArgs),
}

/// Embedding parameters shared by several commands.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Wavelet decomposition levels (K).
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    /// Coefficients per energy group (L).
    #[arg(long = "group-size", default_value_t = 8)]
    pub group_size: usize,
    /// Initial embedding strength factor (d).
    #[arg(long, default_value_t = 0.4)]
    pub strength: f64,
    /// Minimum watermarked SNR in dB.
    #[arg(long = "snr-target", default_value_t = 20.0)]
    pub snr_target: f64,
    /// Sync detection threshold (max bit mismatches, T).
    #[arg(long, default_value_t = 5)]
    pub threshold: usize,
}

impl ConfigArgs {
    pub fn to_config(&self) -> EmbedConfig {
        EmbedConfig {
            levels: self.levels,
            group_len: self.group_size,
            strength_factor: self.strength,
            snr_target_db: self.snr_target,
            threshold: self.threshold,
            ..EmbedConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Payload as a hex string (big-endian bits within each byte) or
    /// `@file` for raw bytes.
    #[arg(long)]
    pub payload: String,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write the embed report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Write recovered bits as hex (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Skip the resynchronization interpolation (ablation baseline).
    #[arg(long = "no-resync", default_value_t = false)]
    pub no_resync: bool,
    /// Write the extract report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Linear temporal scaling factor.
    #[arg(long = "temporal-scale", default_value_t = 1.0)]
    pub temporal_scale: f64,
    /// Amplitude scaling factor.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    /// Noise SNR in dB; omit for a noiseless channel.
    #[arg(long = "noise-snr")]
    pub noise_snr: Option<f64>,
    #[arg(long, env = "WAVEMARK_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Amplitude scaling attack with this gain.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Additive white Gaussian noise at this SNR (dB).
    #[arg(long = "noise-snr")]
    pub noise_snr: Option<f64>,
    /// Requantization to this bit depth.
    #[arg(long)]
    pub bits: Option<u32>,
    /// Resampling through this intermediate rate (Hz).
    #[arg(long)]
    pub rate: Option<u32>,
    /// Lowpass filtering at this cutoff (Hz).
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, env = "WAVEMARK_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl AttackArgs {
    fn to_spec(&self) -> Result<AttackSpec> {
        let mut specs = Vec::new();
        if let Some(gain) = self.gain {
            specs.push(AttackSpec::AmplitudeScale { gain });
        }
        if let Some(snr_db) = self.noise_snr {
            specs.push(AttackSpec::Awgn { snr_db, seed: self.seed });
        }
        if let Some(bits) = self.bits {
            specs.push(AttackSpec::Requantize { bits });
        }
        if let Some(rate_hz) = self.rate {
            specs.push(AttackSpec::Resample { rate_hz });
        }
        if let Some(cutoff_hz) = self.cutoff {
            specs.push(AttackSpec::Lowpass { cutoff_hz });
        }
        match specs.len() {
            1 => Ok(specs.pop().unwrap()),
            0 => Err(Error::InvalidParameter(
                "select an attack: --gain, --noise-snr, --bits, --rate, or --cutoff".into(),
            )),
            _ => Err(Error::InvalidParameter(
                "select exactly one attack kind per invocation".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of WAV files to benchmark.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output path prefix: writes `<report>.csv`.
    #[arg(long)]
    pub report: PathBuf,
    /// Payload override (hex or @file); defaults to seeded random bits.
    #[arg(long)]
    pub payload: Option<String>,
    /// Attack/channel list as JSON; defaults to the built-in catalog.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "WAVEMARK_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub embed: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Sample rate used for the capacity figure.
    #[arg(long, default_value_t = 44_100)]
    pub rate: u32,
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Embed(args) => run_embed(args),
        Command::Extract(args) => run_extract(args),
        Command::Channel(args) => run_channel(args),
        Command::Attack(args) => run_attack(args),
        Command::Bench(args) => run_bench(args),
        Command::Analyze(args) => run_analyze(args),
    }
}

fn load_wav(path: &Path) -> Result<AudioBuffer> {
    read_wav(&fs::read(path)?)
}

fn store_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    fs::write(path, write_wav(audio)?)?;
    Ok(())
}

/// Parses a payload given as hex or as `@path` to a raw byte file; bits are
/// big-endian within each byte.
pub fn parse_payload(arg: &str) -> Result<Vec<bool>> {
    let bytes = if let Some(path) = arg.strip_prefix('@') {
        fs::read(path)?
    } else {
        parse_hex(arg)?
    };
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for byte in bytes {
        for shift in (0..8).rev() {
            bits.push((byte >> shift) & 1 == 1);
        }
    }
    if bits.is_empty() {
        return Err(Error::EmptyPayload);
    }
    Ok(bits)
}

fn parse_hex(s: &str) -> Result<Vec<u8>> {
    let s = s.trim();
    if s.is_empty() || s.len() % 2 != 0 {
        return Err(Error::InvalidParameter(
            "hex payload must have an even, nonzero number of digits".into(),
        ));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| {
                Error::InvalidParameter(format!("invalid hex byte {:?}", &s[i..i + 2]))
            })
        })
        .collect()
}

/// Packs bits into hex, big-endian within each byte, zero-padding the tail.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(8) * 2);
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &bit) in chunk.iter().enumerate() {
            if bit {
                byte |= 1 << (7 - i);
            }
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn run_embed(args: &EmbedArgs) -> Result<()> {
    let cfg = args.config.to_config();
    let audio = load_wav(&args.input)?;
    let payload = parse_payload(&args.payload)?;
    let (marked, report) = embed(&audio, &payload, &cfg)?;
    store_wav(&args.output, &marked)?;
    if let Some(path) = &args.report {
        fs::write(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    println!(
        "embedded {} bits over {} frames (strength {:.4}, SNR {})",
        report.bits_embedded,
        report.layout.frame_count,
        report.final_strength_factor,
        report.snr_db.map_or("inf".to_string(), |s| format!("{s:.2} dB")),
    );
    Ok(())
}

fn run_extract(args: &ExtractArgs) -> Result<()> {
    let cfg = args.config.to_config();
    let audio = load_wav(&args.input)?;
    let options = ExtractOptions { resynchronize: !args.no_resync };
    let report = extract_with(&audio, &cfg, &options)?;
    let hex = bits_to_hex(&report.bits);
    match &args.output {
        Some(path) => fs::write(path, hex.as_bytes())?,
        None => println!("{hex}"),
    }
    if let Some(path) = &args.report {
        fs::write(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    eprintln!(
        "decoded {} frames, {} bits, {} skipped",
        report.frames_decoded,
        report.bits.len(),
        report.skipped_bits.len()
    );
    Ok(())
}

fn run_channel(args: &ChannelArgs) -> Result<()> {
    let audio = load_wav(&args.input)?;
    let spec = ChannelSpec {
        temporal_scale: args.temporal_scale,
        amplitude_scale: args.gain,
        noise_snr_db: args.noise_snr,
        rng_seed: args.seed,
    };
    let out = simulate_daad(&audio, &spec)?;
    store_wav(&args.output, &out)?;
    println!("channel: {} -> {} samples", audio.len(), out.len());
    Ok(())
}

fn run_attack(args: &AttackArgs) -> Result<()> {
    let audio = load_wav(&args.input)?;
    let spec = args.to_spec()?;
    let out = apply_attack(&audio, &spec)?;
    store_wav(&args.output, &out)?;
    println!("attack {spec:?} applied");
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = args.config.to_config();
    cfg.validate()?;
    let bps = capacity(args.rate, cfg.levels, cfg.group_len)?;
    println!(
        "capacity: {:.2} bits/s at {} Hz (levels {}, group size {})",
        bps, args.rate, cfg.levels, cfg.group_len
    );
    println!(
        "frame: {} samples ({:.3} s), {} payload bits",
        cfg.block_samples() * cfg.bits_per_frame(),
        (cfg.block_samples() * cfg.bits_per_frame()) as f64 / args.rate as f64,
        cfg.payload_bits_per_frame
    );
    // Detector bit error rates measured over the DA/AD loop, without and
    // with resynchronization.
    let pd_cases = [0.004375, 0.000625];
    println!("sync code: {} bits, threshold {}", cfg.sync.len(), cfg.threshold);
    println!("T    P1          P2(Pd=0.4375%)  P2(Pd=0.0625%)");
    for t in 5..=8u32 {
        let p1 = false_positive_prob(cfg.sync.len() as u32, t)?;
        let p2: Vec<String> = pd_cases
            .iter()
            .map(|&pd| {
                false_negative_prob(cfg.sync.len() as u32, t, pd)
                    .map(|p| format!("{p:.2e}"))
            })
            .collect::<Result<_>>()?;
        println!("{t}    {p1:.2e}     {}        {}", p2[0], p2[1]);
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum BenchCase {
    Unattacked,
    Attack(&'static str, AttackSpec),
    Channel(&'static str, ChannelSpec, ExtractOptions),
}

#[derive(Debug, Deserialize)]
struct BenchConfigFile {
    #[serde(default)]
    attacks: Vec<AttackSpec>,
    #[serde(default)]
    channels: Vec<ChannelSpec>,
}

fn default_cases(seed: u64) -> Vec<BenchCase> {
    let daad = ChannelSpec {
        temporal_scale: 1.003,
        amplitude_scale: 0.9,
        noise_snr_db: Some(30.0),
        rng_seed: seed ^ 0xDAAD,
    };
    vec![
        BenchCase::Unattacked,
        BenchCase::Attack("amplitude_0.10", AttackSpec::AmplitudeScale { gain: 0.1 }),
        BenchCase::Attack("amplitude_0.50", AttackSpec::AmplitudeScale { gain: 0.5 }),
        BenchCase::Attack("amplitude_1.50", AttackSpec::AmplitudeScale { gain: 1.5 }),
        BenchCase::Attack("requantize_8bit", AttackSpec::Requantize { bits: 8 }),
        BenchCase::Attack("resample_8khz", AttackSpec::Resample { rate_hz: 8_000 }),
        BenchCase::Attack("lowpass_9khz", AttackSpec::Lowpass { cutoff_hz: 9_000.0 }),
        BenchCase::Attack("awgn_20db", AttackSpec::Awgn { snr_db: 20.0, seed: seed ^ 0xA0 }),
        BenchCase::Attack("awgn_8db", AttackSpec::Awgn { snr_db: 8.0, seed: seed ^ 0xA1 }),
        BenchCase::Channel("daad", daad, ExtractOptions { resynchronize: true }),
        BenchCase::Channel("daad_no_resync", daad, ExtractOptions { resynchronize: false }),
    ]
}

fn attack_label(spec: &AttackSpec) -> String {
    match spec {
        AttackSpec::AmplitudeScale { gain } => format!("amplitude_{gain:.2}"),
        AttackSpec::Awgn { snr_db, .. } => format!("awgn_{snr_db:.0}db"),
        AttackSpec::Requantize { bits } => format!("requantize_{bits}bit"),
        AttackSpec::Resample { rate_hz } => format!("resample_{rate_hz}hz"),
        AttackSpec::Lowpass { cutoff_hz } => format!("lowpass_{cutoff_hz:.0}hz"),
    }
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.embed.to_config();
    cfg.validate()?;

    let mut files: Vec<PathBuf> = fs::read_dir(&args.corpus)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .wav files in {}",
            args.corpus.display()
        )));
    }

    let cases: Vec<(String, BenchCase)> = match &args.config {
        None => default_cases(args.seed)
            .into_iter()
            .map(|c| {
                let name = match &c {
                    BenchCase::Unattacked => "unattacked".to_string(),
                    BenchCase::Attack(n, _) => n.to_string(),
                    BenchCase::Channel(n, _, _) => n.to_string(),
                };
                (name, c)
            })
            .collect(),
        Some(path) => {
            let parsed: BenchConfigFile = serde_json::from_slice(&fs::read(path)?)
                .map_err(|e| Error::InvalidParameter(format!("bad bench config: {e}")))?;
            let mut cases = vec![("unattacked".to_string(), BenchCase::Unattacked)];
            for spec in parsed.attacks {
                cases.push((attack_label(&spec), BenchCase::Attack("", spec)));
            }
            for (i, spec) in parsed.channels.into_iter().enumerate() {
                cases.push((
                    format!("channel_{i}"),
                    BenchCase::Channel("", spec, ExtractOptions { resynchronize: true }),
                ));
            }
            cases
        }
    };

    let mut csv = String::from("file,case,snr_db,ber_pct,errors,bits,lost_frames\n");
    println!("{:<18} {:<18} {:>9} {:>9} {:>6}", "file", "case", "snr_db", "ber_pct", "lost");
    for path in &files {
        let audio = load_wav(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let payload = match &args.payload {
            Some(p) => parse_payload(p)?,
            None => {
                let frames = layout_frame_count(&audio, &cfg)?;
                random_payload(frames * cfg.payload_bits_per_frame, args.seed)
            }
        };
        let (marked, embed_report) = embed(&audio, &payload, &cfg)?;
        let quality = snr(&audio.samples, &marked.samples)?;

        for (name, case) in &cases {
            let (processed, options) = match case {
                BenchCase::Unattacked => (marked.clone(), ExtractOptions::default()),
                BenchCase::Attack(_, spec) => {
                    (apply_attack(&marked, spec)?, ExtractOptions::default())
                }
                BenchCase::Channel(_, spec, options) => (simulate_daad(&marked, spec)?, *options),
            };
            let stats = match extract_with(&processed, &cfg, &options) {
                Ok(report) => frame_aligned_ber(&payload, &cfg, &embed_report, &report),
                Err(Error::NoSyncFound) => crate::bench::BerStats {
                    total_bits: payload.len(),
                    error_bits: payload.len(),
                    ber_pct: 100.0,
                    lost_frames: embed_report.layout.frame_count,
                    compared_frames: 0,
                },
                Err(e) => return Err(e),
            };
            csv.push_str(&format!(
                "{},{},{:.4},{:.4},{},{},{}\n",
                stem,
                name,
                quality.0,
                stats.ber_pct,
                stats.error_bits,
                stats.total_bits,
                stats.lost_frames
            ));
            println!(
                "{:<18} {:<18} {:>9.2} {:>9.4} {:>6}",
                stem, name, quality.0, stats.ber_pct, stats.lost_frames
            );
        }
    }

    let csv_path = args.report.with_extension("csv");
    fs::write(&csv_path, csv.as_bytes())?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn layout_frame_count(audio: &AudioBuffer, cfg: &EmbedConfig) -> Result<usize> {
    Ok(crate::embed::layout_frames(audio.len(), cfg)?.frame_count)
}
