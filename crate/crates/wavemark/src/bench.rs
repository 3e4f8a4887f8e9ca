//! Benchmark support: synthetic test signals and frame-aligned BER
//! accounting shared by the CLI bench command, the examples, and the test
//! suite.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embed::{EmbedConfig, EmbedReport, FrameLayout};
use crate::extract::ExtractReport;
use crate::wav::AudioBuffer;

use std::f64::consts::PI;

/// Deterministic random payload.
pub fn random_payload(bits: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..bits).map(|_| rng.random()).collect()
}

/// A mixture of low tones, gently lowpassed noise, and an AM component —
/// spectrally close to the kind of program material the embedding carrier
/// band needs.
pub fn tone_mixture(len: usize, sample_rate: u32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / sample_rate as f64;
    let mut lp = 0.0f64;
    let pole = one_pole_coefficient(1_500.0, sample_rate);
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 * dt;
            let envelope = 0.75 + 0.2 * (2.0 * PI * 0.37 * t).sin();
            let tones = 0.30 * (2.0 * PI * 110.0 * t).sin()
                + 0.22 * (2.0 * PI * 220.0 * t + 0.7).sin()
                + 0.15 * (2.0 * PI * 331.0 * t + 1.9).sin()
                + 0.06 * (2.0 * PI * 880.0 * t).sin()
                + 0.03 * (2.0 * PI * 2_500.0 * t).sin();
            lp += pole * (rng.random_range(-1.0..1.0) - lp);
            envelope * (0.8 * tones + 0.35 * lp)
        })
        .collect();
    AudioBuffer { samples, sample_rate }
}

/// Stationary noise lowpassed around 800 Hz.
pub fn filtered_noise(len: usize, sample_rate: u32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pole = one_pole_coefficient(800.0, sample_rate);
    let mut lp = 0.0f64;
    let samples = (0..len)
        .map(|_| {
            lp += pole * (rng.random_range(-1.0..1.0) - lp);
            3.0 * lp
        })
        .collect();
    AudioBuffer { samples, sample_rate }
}

/// Speech-like signal: a harmonic stack on a 150 Hz fundamental under a
/// syllabic amplitude modulation, plus a small noise floor.
pub fn speech_like(len: usize, sample_rate: u32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / sample_rate as f64;
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 * dt;
            let syllables = 0.68 + 0.30 * (2.0 * PI * 3.1 * t).sin();
            let mut voice = 0.0;
            for h in 1..=12 {
                let f = 150.0 * h as f64;
                let formant = 1.0 / (1.0 + (f / 700.0) * (f / 700.0));
                voice += formant * (2.0 * PI * f * t + h as f64).sin();
            }
            syllables * (0.28 * voice + 0.02 * rng.random_range(-1.0..1.0))
        })
        .collect();
    AudioBuffer { samples, sample_rate }
}

fn one_pole_coefficient(cutoff_hz: f64, sample_rate: u32) -> f64 {
    1.0 - (-2.0 * PI * cutoff_hz / sample_rate as f64).exp()
}

/// The three-clip synthetic corpus used by the robustness suites, sized to a
/// whole number of frames.
pub fn synthetic_corpus(frames: usize, cfg: &EmbedConfig) -> Vec<(String, AudioBuffer)> {
    let len = frames * cfg.block_samples() * cfg.bits_per_frame();
    vec![
        ("mixture".to_string(), tone_mixture(len, 44_100, 0x311)),
        ("filtered_noise".to_string(), filtered_noise(len, 44_100, 0x522)),
        ("speech_like".to_string(), speech_like(len, 44_100, 0x733)),
    ]
}

/// Frame-aligned BER between what was embedded and what an extraction run
/// recovered.
#[derive(Debug, Clone, Serialize)]
pub struct BerStats {
    /// Payload bits compared (embedded minus skipped).
    pub total_bits: usize,
    /// Mismatches, counting every bit of an undecoded frame as an error.
    pub error_bits: usize,
    /// Error percentage.
    pub ber_pct: f64,
    /// Embedded frames with no matching decoded frame.
    pub lost_frames: usize,
    /// Decoded frames that matched an embedded frame index.
    pub compared_frames: usize,
}

/// Compares extraction output against the embedded payload.
///
/// Decoded frames are matched to embedded frame indices through their sync
/// start positions (robust to missing frames), payload positions skipped as
/// degenerate on either side are excluded, and frames that never decoded
/// count as all-errors.
pub fn frame_aligned_ber(
    payload: &[bool],
    cfg: &EmbedConfig,
    embed_report: &EmbedReport,
    extract_report: &ExtractReport,
) -> BerStats {
    let layout: &FrameLayout = &embed_report.layout;
    let per_frame = cfg.payload_bits_per_frame;

    // Map each decoded frame to an embedded frame index via its position
    // under the measured time scale.
    let alpha = if extract_report.hits.is_empty() {
        1.0
    } else {
        extract_report.hits.iter().map(|h| h.alpha).sum::<f64>()
            / extract_report.hits.len() as f64
    };
    let mut decoded_of_frame: Vec<Option<usize>> = vec![None; layout.frame_count];
    for (decoded_idx, hit) in extract_report.hits.iter().enumerate() {
        let frame = (hit.start_sample as f64 / (alpha * layout.frame_len as f64)).round() as usize;
        if frame < layout.frame_count && decoded_of_frame[frame].is_none() {
            decoded_of_frame[frame] = Some(decoded_idx);
        }
    }

    // Reassemble each decoded frame's bits, restoring skipped positions.
    let mut skipped = extract_report.skipped_bits.iter().peekable();
    let mut bit_iter = extract_report.bits.iter();
    let mut decoded_frames: Vec<Vec<Option<bool>>> =
        Vec::with_capacity(extract_report.frames_decoded);
    for frame in 0..extract_report.frames_decoded {
        let mut bits = Vec::with_capacity(per_frame);
        for slot in 0..per_frame {
            let global = frame * per_frame + slot;
            if skipped.peek() == Some(&&global) {
                skipped.next();
                bits.push(None);
            } else {
                bits.push(bit_iter.next().copied());
            }
        }
        decoded_frames.push(bits);
    }

    let embed_skips: std::collections::HashSet<usize> =
        embed_report.skipped_payload_bits.iter().copied().collect();

    let mut total = 0usize;
    let mut errors = 0usize;
    let mut lost = 0usize;
    let mut compared = 0usize;
    for frame in 0..layout.frame_count {
        let decoded = decoded_of_frame[frame].map(|i| &decoded_frames[i]);
        if decoded.is_some() {
            compared += 1;
        } else {
            lost += 1;
        }
        for slot in 0..per_frame {
            let global = frame * per_frame + slot;
            if embed_skips.contains(&global) {
                continue;
            }
            let sent = payload[global % payload.len()];
            total += 1;
            match decoded.and_then(|bits| bits[slot]) {
                Some(got) if got == sent => {}
                _ => errors += 1,
            }
        }
    }

    BerStats {
        total_bits: total,
        error_bits: errors,
        ber_pct: if total == 0 { 0.0 } else { errors as f64 / total as f64 * 100.0 },
        lost_frames: lost,
        compared_frames: compared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::embed;
    use crate::extract::extract;

    #[test]
    fn corpus_clips_have_low_band_energy_everywhere() {
        let cfg = EmbedConfig::default();
        for (name, clip) in synthetic_corpus(2, &cfg) {
            assert_eq!(clip.len() % cfg.block_samples(), 0);
            let peak = clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            assert!(peak < 0.95, "{name} peaks at {peak}");
            for (b, block) in clip.samples.chunks_exact(cfg.block_samples()).enumerate() {
                let coeffs = crate::dwt::forward_dwt(block, cfg.levels).unwrap().approx;
                let energy: f64 = coeffs.iter().map(|c| c.abs()).sum();
                assert!(energy > 1e-3, "{name} block {b} is nearly silent");
            }
        }
    }

    #[test]
    fn ber_accounting_round_trip_and_lost_frames() {
        let cfg = EmbedConfig::default();
        let audio = tone_mixture(3 * 96_768, 44_100, 0xBEEF);
        let payload = random_payload(96, 0x5EED);
        let (marked, embed_report) = embed(&audio, &payload, &cfg).unwrap();
        let extract_report = extract(&marked, &cfg).unwrap();
        let stats = frame_aligned_ber(&payload, &cfg, &embed_report, &extract_report);
        assert_eq!(stats.total_bits, 96);
        assert_eq!(stats.error_bits, 0);
        assert_eq!(stats.ber_pct, 0.0);
        assert_eq!(stats.lost_frames, 0);
        assert_eq!(stats.compared_frames, 3);

        // Dropping one decoded frame charges its full bit count.
        let mut partial = extract_report.clone();
        partial.hits.remove(1);
        partial.frames_decoded -= 1;
        partial.bits.drain(32..64);
        let stats = frame_aligned_ber(&payload, &cfg, &embed_report, &partial);
        assert_eq!(stats.lost_frames, 1);
        assert_eq!(stats.error_bits, 32);
    }
}
