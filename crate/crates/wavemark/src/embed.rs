//! Watermark embedding.
//!
//! Each frame carries the synchronization code followed by a fixed number of
//! payload bits. Every bit owns one block of `3 L 2^K` samples: the block is
//! decomposed with a K-level transform, the `3L` low-band coefficients are
//! split into three groups of `L`, and the bit is forced into the ordering of
//! the group energy differences. The modification is multiplicative, so the
//! decision the extractor reads is invariant under amplitude scaling.
//!
//! A global strength factor is reduced geometrically until the watermarked
//! signal meets the configured quality floor.

use serde::{Deserialize, Serialize};

use crate::dwt::{forward_dwt, inverse_dwt, DwtPyramid};
use crate::error::{Error, Result};
use crate::metrics::snr;
use crate::sync::SyncCode;
use crate::wav::AudioBuffer;

/// Coefficient blocks whose total magnitude falls below this are degenerate:
/// a multiplicative rule cannot move all-zero coefficients, so the bit is
/// skipped and reported instead.
pub const DEGENERATE_EPS: f64 = 1e-12;

// Stay strictly inside the ordering-preservation bound so the max/med/min
// roles survive floating-point evaluation on the extractor side.
const CAP_SAFETY: f64 = 1.0 - 1e-6;

const MAX_STRENGTH_ITERATIONS: usize = 20;
const STRENGTH_DECAY: f64 = 0.8;

/// Embedding parameters shared (except the strength) with the extractor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedConfig {
    /// Wavelet decomposition levels (K).
    pub levels: usize,
    /// Coefficients per energy group (L).
    pub group_len: usize,
    /// Initial embedding strength factor (d); reduced adaptively.
    pub strength_factor: f64,
    /// Minimum acceptable watermarked SNR in dB.
    pub snr_target_db: f64,
    /// Synchronization code embedded at the head of every frame.
    pub sync: SyncCode,
    /// Payload bits carried by each frame.
    pub payload_bits_per_frame: usize,
    /// Maximum Hamming mismatches accepted by the sync search (T).
    pub threshold: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            levels: 6,
            group_len: 8,
            strength_factor: 0.4,
            snr_target_db: 20.0,
            sync: SyncCode::default(),
            payload_bits_per_frame: 32,
            threshold: 5,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels >= usize::BITS as usize {
            return Err(Error::InvalidParameter("levels must be in 1..64".into()));
        }
        if self.group_len == 0 {
            return Err(Error::InvalidParameter("group length must be positive".into()));
        }
        if !(self.strength_factor > 0.0) || !self.strength_factor.is_finite() {
            return Err(Error::InvalidParameter("strength factor must be positive".into()));
        }
        if !(self.snr_target_db > 0.0) {
            return Err(Error::InvalidParameter("SNR target must be positive".into()));
        }
        if self.sync.is_empty() {
            return Err(Error::InvalidParameter("sync code must be non-empty".into()));
        }
        if self.payload_bits_per_frame == 0 {
            return Err(Error::InvalidParameter(
                "payload bits per frame must be positive".into(),
            ));
        }
        if self.threshold >= self.sync.len() {
            return Err(Error::InvalidParameter(
                "threshold must be below the sync code length".into(),
            ));
        }
        Ok(())
    }

    /// Samples occupied by one embedded bit: `3 L 2^K`.
    pub fn block_samples(&self) -> usize {
        3 * self.group_len << self.levels
    }

    /// Bits per frame: sync code plus payload.
    pub fn bits_per_frame(&self) -> usize {
        self.sync.len() + self.payload_bits_per_frame
    }
}

/// Sample layout derived from a configuration and a signal length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameLayout {
    /// Samples in the sync region of one frame (N1).
    pub sync_region_len: usize,
    /// Samples in the payload region of one frame (N2).
    pub payload_region_len: usize,
    /// Samples in one whole frame.
    pub frame_len: usize,
    /// Whole frames that fit the signal.
    pub frame_count: usize,
}

/// Computes the frame layout, requiring room for at least one frame.
pub fn layout_frames(total_samples: usize, cfg: &EmbedConfig) -> Result<FrameLayout> {
    cfg.validate()?;
    let block = cfg.block_samples();
    let sync_region_len = block * cfg.sync.len();
    let payload_region_len = block * cfg.payload_bits_per_frame;
    let frame_len = sync_region_len + payload_region_len;
    let frame_count = total_samples / frame_len;
    if frame_count == 0 {
        return Err(Error::AudioTooShort { needed: frame_len, got: total_samples });
    }
    Ok(FrameLayout { sync_region_len, payload_region_len, frame_len, frame_count })
}

/// Absolute-value sums of the three coefficient groups, with a deterministic
/// max/med/min ordering (descending energy, ties broken by group position).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEnergies {
    /// Energy per group, in positional order.
    pub values: [f64; 3],
    /// Group positions sorted by role: `order[0]` is the max-energy group,
    /// `order[1]` the median, `order[2]` the min.
    pub order: [usize; 3],
}

impl GroupEnergies {
    pub fn max(&self) -> f64 {
        self.values[self.order[0]]
    }

    pub fn med(&self) -> f64 {
        self.values[self.order[1]]
    }

    pub fn min(&self) -> f64 {
        self.values[self.order[2]]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Sums `|c|` over the three consecutive groups of `group_len` coefficients.
pub fn group_energies(coeffs: &[f64], group_len: usize) -> Result<GroupEnergies> {
    if group_len == 0 || coeffs.len() != 3 * group_len {
        return Err(Error::WrongCoefficientCount {
            expected: 3 * group_len.max(1),
            got: coeffs.len(),
        });
    }
    let mut values = [0.0f64; 3];
    for (g, chunk) in coeffs.chunks_exact(group_len).enumerate() {
        values[g] = chunk.iter().map(|c| c.abs()).sum();
    }
    let mut order = [0usize, 1, 2];
    // Descending energy; ascending group index on ties.
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    Ok(GroupEnergies { values, order })
}

/// Energy differences `A = Emax - Emed` and `B = Emed - Emin`.
pub fn energy_diffs(g: &GroupEnergies) -> (f64, f64) {
    (g.max() - g.med(), g.med() - g.min())
}

/// Embedding strength for one block: `S = d * sum|c| / 3`.
pub fn embedding_strength(coeffs: &[f64], strength_factor: f64) -> f64 {
    strength_factor * coeffs.iter().map(|c| c.abs()).sum::<f64>() / 3.0
}

/// Largest strength that keeps the max/med/min ordering intact after
/// embedding `bit` (the bound is bit-dependent).
///
/// When the median and minimum groups are both zero, a one-bit cannot disturb
/// the ordering at any strength and the bound is infinite.
pub fn strength_cap(bit: bool, g: &GroupEnergies) -> Result<f64> {
    if g.total() < DEGENERATE_EPS {
        return Err(Error::DegenerateBlock { eps: DEGENERATE_EPS });
    }
    let spread = g.max() - g.min();
    let cap = if bit {
        let denom = g.med() + g.min();
        if denom == 0.0 {
            f64::INFINITY
        } else {
            2.0 * g.med() / denom * spread
        }
    } else {
        2.0 * g.med() / (g.max() + g.med()) * spread
    };
    Ok(cap)
}

/// Result of embedding one bit into a coefficient block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitOutcome {
    /// False when the energy relation already encoded the bit.
    pub changed: bool,
    /// The strength actually enforced after the ordering-preservation clamp.
    pub applied_strength: f64,
}

/// Embeds one bit into `3L` low-band coefficients in place.
///
/// If the energy-difference relation already encodes the bit with margin
/// `S`, nothing changes. Otherwise the max- and min-energy groups are scaled
/// one way and the median group the other, which lands the margin exactly on
/// the clamped strength while preserving the group ordering.
pub fn embed_bit(coeffs: &mut [f64], bit: bool, strength: f64) -> Result<BitOutcome> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::InvalidParameter(format!("strength {strength} must be >= 0")));
    }
    if coeffs.is_empty() || coeffs.len() % 3 != 0 {
        return Err(Error::WrongCoefficientCount {
            expected: 3 * (coeffs.len() / 3).max(1),
            got: coeffs.len(),
        });
    }
    let group_len = coeffs.len() / 3;
    let g = group_energies(coeffs, group_len)?;
    let cap = strength_cap(bit, &g)?;
    let applied = strength.min(CAP_SAFETY * cap);
    let (a, b) = energy_diffs(&g);

    let lead = if bit { a - b } else { b - a };
    if lead >= applied {
        return Ok(BitOutcome { changed: false, applied_strength: applied });
    }

    let beta = applied - lead;
    let factor = beta / (g.total() + g.med());
    let (outer, median) = if bit {
        (1.0 + factor, 1.0 - factor)
    } else {
        (1.0 - factor, 1.0 + factor)
    };
    for (pos, scale) in [(g.order[0], outer), (g.order[1], median), (g.order[2], outer)] {
        for c in &mut coeffs[pos * group_len..(pos + 1) * group_len] {
            *c *= scale;
        }
    }
    Ok(BitOutcome { changed: true, applied_strength: applied })
}

/// Strategy deciding when the watermark distortion is acceptable. The
/// default controller compares SNR against a floor; a perceptual model can be
/// plugged in without touching the embedding loop.
pub trait QualityModel {
    /// Quality score of the watermarked signal; higher is better.
    fn assess(&self, original: &AudioBuffer, watermarked: &AudioBuffer) -> f64;
    /// Minimum acceptable score.
    fn floor(&self) -> f64;
}

/// SNR-based quality floor.
#[derive(Debug, Clone, Copy)]
pub struct SnrFloor {
    pub min_db: f64,
}

impl QualityModel for SnrFloor {
    fn assess(&self, original: &AudioBuffer, watermarked: &AudioBuffer) -> f64 {
        snr(&original.samples, &watermarked.samples).map(|s| s.0).unwrap_or(f64::NEG_INFINITY)
    }

    fn floor(&self) -> f64 {
        self.min_db
    }
}

/// Where a skipped (degenerate) bit lived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SkippedBit {
    pub frame: usize,
    /// Bit slot within the frame: `0..sync_len` is the sync region.
    pub slot: usize,
}

/// Outcome of an embedding run.
#[derive(Debug, Clone, Serialize)]
pub struct EmbedReport {
    /// Strength factor in effect for the accepted pass.
    pub final_strength_factor: f64,
    /// Embedding passes performed by the adaptive controller.
    pub iterations: usize,
    /// Whole-signal SNR of the accepted pass (None when nothing changed).
    pub snr_db: Option<f64>,
    /// Per-frame SNR (None for untouched frames).
    pub frame_snrs_db: Vec<Option<f64>>,
    /// Global payload-bit indices (frame * bits + slot) that were skipped.
    pub skipped_payload_bits: Vec<usize>,
    /// Degenerate sync bits, kept separate since they do not affect payload
    /// accounting.
    pub skipped_sync_bits: Vec<SkippedBit>,
    pub layout: FrameLayout,
    /// Total bits written (sync + payload, skips excluded).
    pub bits_embedded: usize,
}

/// Embeds `payload` into `audio`, cycling the payload if it is shorter than
/// the total capacity. The strength factor starts at the configured value
/// and is multiplied by 0.8 until the coefficient-domain SNR meets the
/// target (at most 20 passes).
pub fn embed(
    audio: &AudioBuffer,
    payload: &[bool],
    cfg: &EmbedConfig,
) -> Result<(AudioBuffer, EmbedReport)> {
    embed_impl(audio, payload, cfg, None)
}

/// Like [`embed`], but the acceptance decision comes from an external
/// quality model, which sees the fully reconstructed candidate signal on
/// every pass.
pub fn embed_with_quality(
    audio: &AudioBuffer,
    payload: &[bool],
    cfg: &EmbedConfig,
    quality: &dyn QualityModel,
) -> Result<(AudioBuffer, EmbedReport)> {
    embed_impl(audio, payload, cfg, Some(quality))
}

struct BlockPlan {
    offset: usize,
    frame: usize,
    slot: usize,
    bit: bool,
    pyramid: DwtPyramid,
}

struct PassResult {
    coeff_mods: Vec<Option<Vec<f64>>>,
    diff_sq: f64,
    frame_diff_sq: Vec<f64>,
    skipped: Vec<usize>, // indices into the block plan
    embedded: usize,
}

fn embed_impl(
    audio: &AudioBuffer,
    payload: &[bool],
    cfg: &EmbedConfig,
    quality: Option<&dyn QualityModel>,
) -> Result<(AudioBuffer, EmbedReport)> {
    cfg.validate()?;
    if payload.is_empty() {
        return Err(Error::EmptyPayload);
    }
    let layout = layout_frames(audio.len(), cfg)?;
    let block_len = cfg.block_samples();
    let bits_per_frame = cfg.bits_per_frame();
    let sync_len = cfg.sync.len();

    // Decompose every bit block once; the adaptive loop only reworks the
    // low-band coefficients.
    let mut plan = Vec::with_capacity(layout.frame_count * bits_per_frame);
    for frame in 0..layout.frame_count {
        for slot in 0..bits_per_frame {
            let offset = frame * layout.frame_len + slot * block_len;
            let bit = if slot < sync_len {
                cfg.sync.bits()[slot]
            } else {
                let payload_index = frame * cfg.payload_bits_per_frame + (slot - sync_len);
                payload[payload_index % payload.len()]
            };
            let pyramid = forward_dwt(&audio.samples[offset..offset + block_len], cfg.levels)?;
            plan.push(BlockPlan { offset, frame, slot, bit, pyramid });
        }
    }

    let signal_energy: f64 = audio.samples.iter().map(|s| s * s).sum();
    let frame_energy: Vec<f64> = (0..layout.frame_count)
        .map(|f| {
            let start = f * layout.frame_len;
            audio.samples[start..start + layout.frame_len]
                .iter()
                .map(|s| s * s)
                .sum()
        })
        .collect();

    let mut iterations = 0;
    let mut d = cfg.strength_factor;
    let mut accepted: Option<(PassResult, f64, Option<AudioBuffer>)> = None;
    while iterations < MAX_STRENGTH_ITERATIONS {
        iterations += 1;
        let pass = run_pass(&plan, d)?;
        // Only the low band changes, so the time-domain SNR equals the
        // coefficient-domain ratio and no reconstruction is needed here.
        let snr_db = if pass.diff_sq == 0.0 {
            f64::INFINITY
        } else {
            -10.0 * (pass.diff_sq / signal_energy).log10()
        };
        let (score, floor, rebuilt) = match quality {
            None => (snr_db, cfg.snr_target_db, None),
            Some(model) => {
                let candidate = AudioBuffer {
                    samples: materialize(&audio.samples, &plan, &pass)?,
                    sample_rate: audio.sample_rate,
                };
                let score = model.assess(audio, &candidate);
                (score, model.floor(), Some(candidate))
            }
        };
        let last_chance = iterations == MAX_STRENGTH_ITERATIONS;
        if score >= floor || last_chance {
            if score < floor {
                log::warn!(
                    "quality floor not reached after {iterations} passes (score {score:.2})"
                );
            }
            accepted = Some((pass, snr_db, rebuilt));
            break;
        }
        d *= STRENGTH_DECAY;
    }
    let (pass, snr_db, rebuilt) = accepted.expect("loop always accepts a pass");

    if pass.embedded == 0 {
        return Err(Error::AllFramesDegenerate);
    }

    let watermarked = match rebuilt {
        Some(buf) => buf,
        None => AudioBuffer {
            samples: materialize(&audio.samples, &plan, &pass)?,
            sample_rate: audio.sample_rate,
        },
    };

    let mut skipped_payload_bits = Vec::new();
    let mut skipped_sync_bits = Vec::new();
    for &i in &pass.skipped {
        let b = &plan[i];
        if b.slot < sync_len {
            skipped_sync_bits.push(SkippedBit { frame: b.frame, slot: b.slot });
        } else {
            skipped_payload_bits
                .push(b.frame * cfg.payload_bits_per_frame + (b.slot - sync_len));
        }
    }

    let frame_snrs_db = (0..layout.frame_count)
        .map(|f| {
            let diff = pass.frame_diff_sq[f];
            if diff == 0.0 || frame_energy[f] == 0.0 {
                None
            } else {
                Some(-10.0 * (diff / frame_energy[f]).log10())
            }
        })
        .collect();

    let report = EmbedReport {
        final_strength_factor: d,
        iterations,
        snr_db: if snr_db.is_finite() { Some(snr_db) } else { None },
        frame_snrs_db,
        skipped_payload_bits,
        skipped_sync_bits,
        layout,
        bits_embedded: pass.embedded,
    };
    Ok((watermarked, report))
}

fn run_pass(plan: &[BlockPlan], d: f64) -> Result<PassResult> {
    let mut coeff_mods = Vec::with_capacity(plan.len());
    let mut diff_sq = 0.0;
    let mut frame_diff_sq = Vec::new();
    let mut skipped = Vec::new();
    let mut embedded = 0;
    for (i, block) in plan.iter().enumerate() {
        while frame_diff_sq.len() <= block.frame {
            frame_diff_sq.push(0.0);
        }
        let mut coeffs = block.pyramid.approx.clone();
        let s = embedding_strength(&coeffs, d);
        match embed_bit(&mut coeffs, block.bit, s) {
            Ok(outcome) => {
                embedded += 1;
                if outcome.changed {
                    let delta: f64 = coeffs
                        .iter()
                        .zip(&block.pyramid.approx)
                        .map(|(new, old)| (new - old) * (new - old))
                        .sum();
                    diff_sq += delta;
                    frame_diff_sq[block.frame] += delta;
                    coeff_mods.push(Some(coeffs));
                } else {
                    coeff_mods.push(None);
                }
            }
            Err(Error::DegenerateBlock { .. }) => {
                skipped.push(i);
                coeff_mods.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PassResult { coeff_mods, diff_sq, frame_diff_sq, skipped, embedded })
}

fn materialize(original: &[f64], plan: &[BlockPlan], pass: &PassResult) -> Result<Vec<f64>> {
    let mut out = original.to_vec();
    for (block, mods) in plan.iter().zip(&pass.coeff_mods) {
        if let Some(coeffs) = mods {
            let mut pyramid = block.pyramid.clone();
            pyramid.approx = coeffs.clone();
            let rebuilt = inverse_dwt(&pyramid)?;
            out[block.offset..block.offset + rebuilt.len()].copy_from_slice(&rebuilt);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_bit;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn group_energies_absolute_values() {
        let g = group_energies(&[-3.0, 2.0, 1.0], 1).unwrap();
        assert_eq!(g.values, [3.0, 2.0, 1.0]);
        assert_eq!(g.order, [0, 1, 2]);
        assert_eq!((g.max(), g.med(), g.min()), (3.0, 2.0, 1.0));
    }

    #[test]
    fn group_energies_tie_break_is_positional() {
        let g = group_energies(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(g.order, [0, 1, 2]);
        let g = group_energies(&[2.0, 5.0, 5.0], 1).unwrap();
        assert_eq!(g.order, [1, 2, 0]);
    }

    #[test]
    fn group_energies_sums_groups() {
        let g = group_energies(&[1.0, 1.0, 2.0, 2.0, 0.0, 3.0], 2).unwrap();
        assert_eq!(g.values, [2.0, 4.0, 3.0]);
        assert_eq!(g.order, [1, 2, 0]);
        assert!(group_energies(&[1.0; 5], 2).is_err());
    }

    #[test]
    fn energy_diff_pairs() {
        let g = group_energies(&[10.0, 4.0, 2.0], 1).unwrap();
        assert_eq!(energy_diffs(&g), (6.0, 2.0));
        let g = group_energies(&[5.0, 5.0, 5.0], 1).unwrap();
        assert_eq!(energy_diffs(&g), (0.0, 0.0));
        let g = group_energies(&[9.0, 5.0, 2.0], 1).unwrap();
        assert_eq!(energy_diffs(&g), (4.0, 3.0));
    }

    #[test]
    fn strength_formula() {
        let coeffs = [10.0, -10.0, 10.0];
        assert!((embedding_strength(&coeffs, 0.1) - 1.0).abs() < 1e-15);
        assert_eq!(embedding_strength(&[0.0; 3], 0.4), 0.0);
        let doubled: Vec<f64> = coeffs.iter().map(|c| c * 2.0).collect();
        assert_eq!(
            embedding_strength(&doubled, 0.1),
            2.0 * embedding_strength(&coeffs, 0.1)
        );
    }

    #[test]
    fn cap_values() {
        let g = group_energies(&[9.0, 5.0, 2.0], 1).unwrap();
        assert!((strength_cap(true, &g).unwrap() - 10.0).abs() < 1e-12);
        let g = group_energies(&[10.0, 4.0, 2.0], 1).unwrap();
        let cap = strength_cap(false, &g).unwrap();
        assert!((cap - 32.0 / 7.0).abs() < 1e-12);
        let g = group_energies(&[3.0, 3.0, 3.0], 1).unwrap();
        assert_eq!(strength_cap(true, &g).unwrap(), 0.0);
        assert_eq!(strength_cap(false, &g).unwrap(), 0.0);
        let g = group_energies(&[0.0, 0.0, 0.0], 1).unwrap();
        assert!(matches!(strength_cap(true, &g), Err(Error::DegenerateBlock { .. })));
    }

    #[test]
    fn embed_one_bit_matches_hand_evaluation() {
        // Energies (9, 5, 2), bit 1, S = 3: beta = 2, denominator 21.
        let mut coeffs = [9.0, 5.0, 2.0];
        let out = embed_bit(&mut coeffs, true, 3.0).unwrap();
        assert!(out.changed);
        assert!((coeffs[0] - 9.0 * 23.0 / 21.0).abs() < 1e-12);
        assert!((coeffs[1] - 5.0 * 19.0 / 21.0).abs() < 1e-12);
        assert!((coeffs[2] - 2.0 * 23.0 / 21.0).abs() < 1e-12);
        let g = group_energies(&coeffs, 1).unwrap();
        let (a, b) = energy_diffs(&g);
        assert!((a - b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn embed_zero_bit_matches_hand_evaluation() {
        // Energies (10, 4, 2), bit 0, S = 2: beta = 6, factor 0.3.
        let mut coeffs = [10.0, 4.0, 2.0];
        let out = embed_bit(&mut coeffs, false, 2.0).unwrap();
        assert!(out.changed);
        assert!((coeffs[0] - 7.0).abs() < 1e-12);
        assert!((coeffs[1] - 5.2).abs() < 1e-12);
        assert!((coeffs[2] - 1.4).abs() < 1e-12);
        let g = group_energies(&coeffs, 1).unwrap();
        let (a, b) = energy_diffs(&g);
        assert!((b - a - 2.0).abs() < 1e-12);
        assert!(g.max() >= g.med() && g.med() >= g.min());
    }

    #[test]
    fn already_satisfied_bit_is_a_no_op() {
        let mut coeffs = [10.0, 4.0, 2.0];
        let out = embed_bit(&mut coeffs, true, 3.0).unwrap();
        assert!(!out.changed);
        assert_eq!(coeffs, [10.0, 4.0, 2.0]);
    }

    #[test]
    fn degenerate_block_is_rejected() {
        let mut coeffs = [0.0; 24];
        assert!(matches!(
            embed_bit(&mut coeffs, true, 1.0),
            Err(Error::DegenerateBlock { .. })
        ));
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, group_len: usize) -> Vec<f64> {
        (0..3 * group_len)
            .map(|_| {
                let mag = 10f64.powf(rng.random_range(-3.0..2.0));
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }

    #[test]
    fn ordering_preserved_and_margin_exact_under_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0DDE);
        for trial in 0..20_000 {
            let group_len = *[1usize, 2, 4, 8].choose(&mut rng).unwrap();
            let mut coeffs = random_coeffs(&mut rng, group_len);
            let bit = rng.random::<bool>();
            let g = group_energies(&coeffs, group_len).unwrap();
            let before = g.order;
            let s = embedding_strength(&coeffs, rng.random_range(0.01..5.0));
            let out = embed_bit(&mut coeffs, bit, s).unwrap();
            let after = group_energies(&coeffs, group_len).unwrap();
            assert!(
                after.max() >= after.med() && after.med() >= after.min(),
                "trial {trial}: ordering violated"
            );
            assert_eq!(before, after.order, "trial {trial}: group roles changed");
            if out.changed && out.applied_strength > 0.0 {
                let (a, b) = energy_diffs(&after);
                let margin = if bit { a - b } else { b - a };
                let rel = (margin - out.applied_strength).abs() / out.applied_strength;
                assert!(rel < 1e-9, "trial {trial}: margin off by {rel}");
            }
        }
    }

    #[test]
    fn second_application_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1D3);
        for _ in 0..5_000 {
            let group_len = *[1usize, 4, 8].choose(&mut rng).unwrap();
            let mut coeffs = random_coeffs(&mut rng, group_len);
            let bit = rng.random::<bool>();
            let s = embedding_strength(&coeffs, rng.random_range(0.01..2.0));
            embed_bit(&mut coeffs, bit, s).unwrap();
            let snapshot = coeffs.clone();
            embed_bit(&mut coeffs, bit, s).unwrap();
            for (a, b) in snapshot.iter().zip(&coeffs) {
                // The safety clamp may wiggle cap-limited bits by O(1e-6).
                let tol = 2e-6 * a.abs().max(1e-300);
                assert!((a - b).abs() <= tol, "changed {a} -> {b}");
            }
        }
    }

    #[test]
    fn embedding_commutes_with_amplitude_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5CA1E);
        for _ in 0..5_000 {
            let group_len = 4;
            let coeffs = random_coeffs(&mut rng, group_len);
            let bit = rng.random::<bool>();
            let s = embedding_strength(&coeffs, 0.7);
            let phi = 10f64.powf(rng.random_range(-2.0..2.0));

            let mut plain = coeffs.clone();
            embed_bit(&mut plain, bit, s).unwrap();

            let mut scaled: Vec<f64> = coeffs.iter().map(|c| c * phi).collect();
            embed_bit(&mut scaled, bit, phi * s).unwrap();

            for (a, b) in plain.iter().zip(&scaled) {
                assert!((a * phi - b).abs() <= 1e-9 * (a * phi).abs().max(1e-12));
            }
        }
    }

    #[test]
    fn embedded_bits_extract_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xB17);
        for _ in 0..20_000 {
            let group_len = *[1usize, 2, 8].choose(&mut rng).unwrap();
            let mut coeffs = random_coeffs(&mut rng, group_len);
            let bit = rng.random::<bool>();
            let s = embedding_strength(&coeffs, rng.random_range(0.05..2.0));
            let out = embed_bit(&mut coeffs, bit, s).unwrap();
            if out.applied_strength > 0.0 {
                assert_eq!(extract_bit(&coeffs).unwrap(), bit);
            }
        }
    }

    #[test]
    fn default_layout_matches_published_numbers() {
        let cfg = EmbedConfig::default();
        assert_eq!(cfg.block_samples(), 1536);
        let layout = layout_frames(2_469_600, &cfg).unwrap();
        assert_eq!(layout.sync_region_len, 47_616);
        assert_eq!(layout.payload_region_len, 49_152);
        assert_eq!(layout.frame_len, 96_768);
        assert_eq!(layout.frame_count, 25);
        // 25 frames * 32 bits = the published 800-bit watermark.
        assert_eq!(layout.frame_count * cfg.payload_bits_per_frame, 800);
        // About 2.2 seconds per frame at 44.1 kHz.
        let secs = layout.frame_len as f64 / 44_100.0;
        assert!((secs - 2.194).abs() < 0.01);
    }

    #[test]
    fn layout_boundaries() {
        let cfg = EmbedConfig::default();
        let exact = layout_frames(96_768, &cfg).unwrap();
        assert_eq!(exact.frame_count, 1);
        assert!(matches!(
            layout_frames(96_767, &cfg),
            Err(Error::AudioTooShort { .. })
        ));
    }

    fn test_signal(len: usize, seed: u64) -> AudioBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..len)
            .map(|i| {
                let t = i as f64 / 44_100.0;
                0.3 * (2.0 * std::f64::consts::PI * 130.0 * t).sin()
                    + 0.2 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
                    + 0.1 * rng.random_range(-1.0..1.0)
            })
            .collect();
        AudioBuffer::new(samples, 44_100).unwrap()
    }

    fn payload(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn embed_meets_snr_target_and_reports() {
        let audio = test_signal(2 * 96_768 + 100, 9);
        let bits = payload(64, 3);
        let (marked, report) = embed(&audio, &bits, &EmbedConfig::default()).unwrap();
        assert_eq!(marked.len(), audio.len());
        assert!(report.snr_db.unwrap() >= 20.0);
        assert_eq!(report.layout.frame_count, 2);
        assert_eq!(report.bits_embedded, 2 * 63);
        assert!(report.skipped_payload_bits.is_empty());
        // The tail beyond whole frames is untouched.
        assert_eq!(&marked.samples[2 * 96_768..], &audio.samples[2 * 96_768..]);
        // The actual time-domain SNR agrees with the coefficient-domain one.
        let time_snr = snr(&audio.samples, &marked.samples).unwrap().0;
        assert!((time_snr - report.snr_db.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn adaptive_loop_reduces_strength_for_tight_targets() {
        let audio = test_signal(96_768, 11);
        let bits = payload(32, 4);
        let cfg = EmbedConfig { snr_target_db: 42.0, ..EmbedConfig::default() };
        let (_, report) = embed(&audio, &bits, &cfg).unwrap();
        assert!(report.iterations > 1);
        assert!(report.final_strength_factor < cfg.strength_factor);
        assert!(report.snr_db.unwrap() >= 42.0);
    }

    #[test]
    fn pluggable_quality_model_matches_fast_path() {
        let audio = test_signal(96_768, 13);
        let bits = payload(32, 5);
        let cfg = EmbedConfig::default();
        let (fast, fast_report) = embed(&audio, &bits, &cfg).unwrap();
        let (slow, slow_report) =
            embed_with_quality(&audio, &bits, &cfg, &SnrFloor { min_db: cfg.snr_target_db })
                .unwrap();
        assert_eq!(fast.samples, slow.samples);
        assert_eq!(fast_report.final_strength_factor, slow_report.final_strength_factor);
    }

    #[test]
    fn embedding_stays_out_of_detail_bands() {
        let cfg = EmbedConfig::default();
        let audio = test_signal(96_768, 17);
        let bits = payload(32, 6);
        let (marked, _) = embed(&audio, &bits, &cfg).unwrap();
        let diff: Vec<f64> = marked
            .samples
            .iter()
            .zip(&audio.samples)
            .map(|(a, b)| a - b)
            .collect();
        for block in 0..(96_768 / cfg.block_samples()) {
            let start = block * cfg.block_samples();
            let pyr = forward_dwt(&diff[start..start + cfg.block_samples()], cfg.levels).unwrap();
            for band in &pyr.details {
                for &d in band {
                    assert!(d.abs() < 1e-9, "detail leakage {d}");
                }
            }
        }
    }

    #[test]
    fn embed_rejects_bad_input() {
        let audio = test_signal(96_768, 1);
        assert!(matches!(
            embed(&audio, &[], &EmbedConfig::default()),
            Err(Error::EmptyPayload)
        ));
        let short = test_signal(1000, 2);
        assert!(matches!(
            embed(&short, &[true], &EmbedConfig::default()),
            Err(Error::AudioTooShort { .. })
        ));
    }

    #[test]
    fn capacity_matches_frame_arithmetic() {
        let cfg = EmbedConfig::default();
        // One frame carries 63 bits over frame_len samples; Eq. of capacity
        // says the same thing per second.
        let bits_per_second =
            cfg.bits_per_frame() as f64 * 44_100.0 / (63.0 * cfg.block_samples() as f64);
        let cap = crate::metrics::capacity(44_100, cfg.levels, cfg.group_len).unwrap();
        assert!((bits_per_second - cap).abs() < 1e-9);
    }
}
