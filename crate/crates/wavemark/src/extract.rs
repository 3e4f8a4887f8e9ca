//! Blind watermark extraction.
//!
//! The extractor never sees the original audio. It locates frames by
//! searching for the synchronization code in the low band (stepping at the
//! coefficient granularity of 2^K samples, so one candidate per low-band
//! coefficient), measures the temporal scaling factor from the spacing of
//! consecutive sync hits, resamples each payload region back to its nominal
//! length, and reads the bits from the group-energy relation.

use serde::Serialize;

use crate::dwt::low_band;
use crate::embed::{group_energies, energy_diffs, EmbedConfig, DEGENERATE_EPS};
use crate::error::{Error, Result};
use crate::wav::AudioBuffer;

/// Accepted deviation band for the measured scaling factor; twice the
/// drift the channel model produces.
const ALPHA_BAND: f64 = 0.01;
/// Recovered (gap-predicted) hits get a stricter threshold so that the
/// model-driven second pass cannot introduce false frames.
const RECOVERY_MAX_DISTANCE: usize = 3;
/// Upper bound on how many consecutive missed frames the recovery pass will
/// try to fill between two confirmed hits.
const MAX_GAP_FRAMES: usize = 16;

/// One detected synchronization code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncHit {
    /// Sample offset where the sync region starts.
    pub start_sample: usize,
    /// Hamming mismatches against the reference code.
    pub distance: usize,
    /// Temporal scaling factor measured from the spacing to the neighboring
    /// hit; always within [0.99, 1.01] (out-of-band spacings fall back to a
    /// neighbor's estimate or 1.0).
    pub alpha: f64,
}

/// Extraction switches. Disabling resynchronization reads payload regions at
/// their nominal positions and lengths, which is the ablation baseline for
/// temporal-scaling experiments.
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub resynchronize: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { resynchronize: true }
    }
}

/// Result of a blind extraction run.
#[derive(Debug, Clone, Serialize)]
pub struct ExtractReport {
    /// Hits whose payload region was decodable, in signal order.
    pub hits: Vec<SyncHit>,
    /// Recovered payload bits, `payload_bits_per_frame` per decoded frame
    /// minus skipped positions.
    pub bits: Vec<bool>,
    pub frames_decoded: usize,
    /// Global payload positions (frame * bits_per_frame + slot) excluded as
    /// degenerate.
    pub skipped_bits: Vec<usize>,
}

/// Temporal scaling factor from an observed and an expected region length.
pub fn scaling_factor(observed_len: usize, expected_len: usize) -> Result<f64> {
    if expected_len == 0 {
        return Err(Error::InvalidParameter("expected length must be positive".into()));
    }
    if observed_len == 0 {
        return Err(Error::InvalidParameter("observed length must be positive".into()));
    }
    Ok(observed_len as f64 / expected_len as f64)
}

/// Resamples `observed` to `target_len` samples with Lagrange linear
/// interpolation, undoing a constant temporal scaling.
///
/// The first output sample copies the first observed sample and the last
/// output sample copies the last observed one; interior samples interpolate
/// at positions `alpha * i` with `alpha = observed/target`.
pub fn resynchronize(observed: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if observed.len() < 2 {
        return Err(Error::TooShort { min: 2 });
    }
    if target_len < 2 {
        return Err(Error::TooShort { min: 2 });
    }
    let n_obs = observed.len();
    let alpha = n_obs as f64 / target_len as f64;
    let mut out = Vec::with_capacity(target_len);
    out.push(observed[0]);
    for i in 1..target_len - 1 {
        let pos = alpha * i as f64;
        let j = (pos.floor() as usize).min(n_obs - 1);
        let frac = pos - j as f64;
        let j1 = (j + 1).min(n_obs - 1);
        out.push((1.0 - frac) * observed[j] + frac * observed[j1]);
    }
    out.push(observed[n_obs - 1]);
    Ok(out)
}

/// Reads one bit from `3L` low-band coefficients: 1 when the upper energy
/// difference dominates (`A - B >= 0`), else 0. The boundary maps to 1, so
/// an all-zero block reads as 1.
pub fn extract_bit(coeffs: &[f64]) -> Result<bool> {
    Ok(signed_margin(coeffs)? >= 0.0)
}

/// `A - B` from the three group energies; the sign is the bit and the
/// magnitude is the decision margin.
fn signed_margin(coeffs: &[f64]) -> Result<f64> {
    if coeffs.is_empty() || coeffs.len() % 3 != 0 {
        return Err(Error::WrongCoefficientCount {
            expected: 3 * (coeffs.len() / 3).max(1),
            got: coeffs.len(),
        });
    }
    let g = group_energies(coeffs, coeffs.len() / 3)?;
    let (a, b) = energy_diffs(&g);
    Ok(a - b)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    distance: usize,
    score: f64,
}

struct Searcher<'a> {
    samples: &'a [f64],
    levels: usize,
    block: usize,
    sync_region: usize,
    frame_len: usize,
    threshold: usize,
    code: &'a [bool],
}

impl<'a> Searcher<'a> {
    fn new(samples: &'a [f64], cfg: &'a EmbedConfig) -> Self {
        let block = cfg.block_samples();
        Searcher {
            samples,
            levels: cfg.levels,
            block,
            sync_region: block * cfg.sync.len(),
            frame_len: block * cfg.bits_per_frame(),
            threshold: cfg.threshold,
            code: cfg.sync.bits(),
        }
    }

    /// Matches the sync code at `start`, spacing the per-bit blocks by
    /// `alpha * block`. Returns the Hamming distance and a soft score (sum
    /// of decision margins, negated on mismatches) used to break ties.
    fn match_at(&self, start: usize, alpha: f64) -> Option<Candidate> {
        let mut distance = 0usize;
        let mut score = 0.0f64;
        for (i, &code_bit) in self.code.iter().enumerate() {
            let offset = start + (alpha * (i * self.block) as f64).round() as usize;
            if offset + self.block > self.samples.len() {
                return None;
            }
            let coeffs = low_band(&self.samples[offset..offset + self.block], self.levels).ok()?;
            let margin = signed_margin(&coeffs).ok()?;
            if (margin >= 0.0) == code_bit {
                score += margin.abs();
            } else {
                distance += 1;
                score -= margin.abs();
            }
        }
        Some(Candidate { start, distance, score })
    }

    /// Best match over `start + delta` for `delta` in +-radius at `step`
    /// granularity. Ties prefer higher score, then smaller |delta|.
    fn refine(&self, start: usize, alpha: f64, radius: usize, step: usize) -> Option<Candidate> {
        let mut best: Option<(Candidate, usize)> = None;
        let mut delta = -(radius as i64);
        while delta <= radius as i64 {
            let s = start as i64 + delta;
            if s >= 0 {
                if let Some(cand) = self.match_at(s as usize, alpha) {
                    let key = delta.unsigned_abs() as usize;
                    let better = match &best {
                        None => true,
                        Some((b, b_key)) => {
                            (cand.distance, -cand.score, key, cand.start)
                                < (b.distance, -b.score, *b_key, b.start)
                        }
                    };
                    if better {
                        best = Some((cand, key));
                    }
                }
            }
            delta += step as i64;
        }
        best.map(|(c, _)| c)
    }
}

/// Non-maximum suppression: keeps the best candidate (lowest distance, then
/// highest score) within any `window`-sample neighborhood.
fn suppress(mut cands: Vec<Candidate>, window: usize) -> Vec<Candidate> {
    cands.sort_by(|a, b| {
        (a.distance, -a.score, a.start)
            .partial_cmp(&(b.distance, -b.score, b.start))
            .unwrap()
    });
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if kept
            .iter()
            .all(|k| k.start.abs_diff(c.start) >= window)
        {
            kept.push(c);
        }
    }
    kept.sort_by_key(|c| c.start);
    kept
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs[xs.len() / 2])
}

/// Scaling factor implied by the spacing of two hits, if the spacing is a
/// plausible whole number of frames.
fn spacing_alpha(gap: usize, frame_len: usize) -> Option<(usize, f64)> {
    let ratio = gap as f64 / frame_len as f64;
    let frames = ratio.round();
    if frames < 1.0 || frames > MAX_GAP_FRAMES as f64 {
        return None;
    }
    let alpha = ratio / frames;
    if (alpha - 1.0).abs() <= ALPHA_BAND {
        Some((frames as usize, alpha))
    } else {
        None
    }
}

/// Scans `audio` for synchronization codes.
///
/// The coarse pass steps candidate offsets by one low-band coefficient
/// (2^K samples), reusing one per-position bit decision table across all
/// overlapping candidates. Accepted candidates are refined over +-2^K at
/// 2^(K-2) granularity, duplicates are suppressed keeping the best, and the
/// surviving chain is polished with scaled bit positions once the global
/// scaling factor is known. Interior gaps in the chain are re-searched at
/// their predicted positions under a stricter threshold.
pub fn find_syncs(audio: &AudioBuffer, cfg: &EmbedConfig) -> Vec<SyncHit> {
    if cfg.validate().is_err() {
        return Vec::new();
    }
    let searcher = Searcher::new(&audio.samples, cfg);
    let n = audio.samples.len();
    if n < searcher.sync_region {
        return Vec::new();
    }

    let step = 1usize << cfg.levels;
    let coeffs_per_block = searcher.block / step;

    // Per-position decision table: one signed margin per grid offset.
    let grid_len = (n - searcher.block) / step + 1;
    let mut margins = vec![0.0f64; grid_len];
    for (g, margin) in margins.iter_mut().enumerate() {
        let p = g * step;
        let coeffs = low_band(&audio.samples[p..p + searcher.block], cfg.levels)
            .expect("block length is a multiple of 2^levels");
        *margin = signed_margin(&coeffs).expect("block holds 3L coefficients");
    }

    // Coarse scan at coefficient granularity.
    let mut coarse = Vec::new();
    let last_start = (n - searcher.sync_region) / step;
    for g in 0..=last_start {
        let mut distance = 0usize;
        let mut score = 0.0f64;
        for (i, &code_bit) in searcher.code.iter().enumerate() {
            let m = margins[g + i * coeffs_per_block];
            if (m >= 0.0) == code_bit {
                score += m.abs();
            } else {
                distance += 1;
                score -= m.abs();
            }
        }
        if distance <= searcher.threshold {
            coarse.push(Candidate { start: g * step, distance, score });
        }
    }

    // Local refinement absorbs sub-step misalignment.
    let fine = (step / 4).max(1);
    let mut refined = Vec::with_capacity(coarse.len());
    for c in &coarse {
        if let Some(r) = searcher.refine(c.start, 1.0, step, fine) {
            if r.distance <= searcher.threshold {
                refined.push(r);
            }
        }
    }
    let window = searcher.frame_len * 3 / 4;
    let mut hits = suppress(refined, window);

    // Estimate the global scaling factor from the chain spacing, then polish
    // every start with correspondingly scaled bit positions. This removes
    // the alignment bias a scaled sync region induces on the plain search.
    let chain_alpha = |hits: &[Candidate]| -> f64 {
        let alphas: Vec<f64> = hits
            .windows(2)
            .filter_map(|w| spacing_alpha(w[1].start - w[0].start, searcher.frame_len))
            .map(|(_, a)| a)
            .collect();
        median(alphas).unwrap_or(1.0)
    };
    let alpha_hat = chain_alpha(&hits);
    if hits.len() > 1 {
        let mut polished = Vec::with_capacity(hits.len());
        for h in &hits {
            match searcher.refine(h.start, alpha_hat, 3 * step, fine) {
                Some(r) if r.distance <= searcher.threshold => polished.push(r),
                _ => polished.push(*h),
            }
        }
        hits = suppress(polished, window);
    }

    // Predictive recovery of frames the coarse pass missed: spacings close
    // to a whole multiple of the frame length pin down where the missing
    // sync codes must be.
    let alpha_hat = chain_alpha(&hits);
    let mut recovered = Vec::new();
    for w in hits.windows(2) {
        if let Some((frames, alpha)) = spacing_alpha(w[1].start - w[0].start, searcher.frame_len)
        {
            let gap = w[1].start - w[0].start;
            for j in 1..frames {
                let predicted = w[0].start + (j as f64 * gap as f64 / frames as f64).round() as usize;
                if let Some(r) = searcher.refine(predicted, alpha, 4 * step, fine) {
                    if r.distance <= RECOVERY_MAX_DISTANCE.min(searcher.threshold) {
                        recovered.push(r);
                    }
                }
            }
        }
    }
    if !recovered.is_empty() {
        hits.extend(recovered);
        hits = suppress(hits, window);
    }

    // Spacing-derived scaling factor per hit; the final hit reuses its
    // predecessor's estimate, a single hit falls back to the chain value.
    let mut alphas: Vec<Option<f64>> = hits
        .windows(2)
        .map(|w| spacing_alpha(w[1].start - w[0].start, searcher.frame_len).map(|(_, a)| a))
        .collect();
    alphas.push(None);
    let mut filled = Vec::with_capacity(alphas.len());
    let mut last: Option<f64> = None;
    for a in &alphas {
        if a.is_some() {
            last = *a;
        }
        filled.push(last);
    }
    let mut next: Option<f64> = None;
    for (i, a) in alphas.iter().enumerate().rev() {
        if a.is_some() {
            next = *a;
        }
        if filled[i].is_none() {
            filled[i] = next;
        }
    }

    hits.iter()
        .zip(filled)
        .map(|(c, a)| SyncHit {
            start_sample: c.start,
            distance: c.distance,
            alpha: a.unwrap_or(alpha_hat),
        })
        .collect()
}

/// Blind extraction with default options (resynchronization enabled).
pub fn extract(audio: &AudioBuffer, cfg: &EmbedConfig) -> Result<ExtractReport> {
    extract_with(audio, cfg, &ExtractOptions::default())
}

/// Blind extraction.
///
/// For every sync hit the payload region is located from the measured
/// scaling factor, resampled to its nominal length, and decoded one block
/// per bit. Hits whose payload region falls outside the signal are dropped.
pub fn extract_with(
    audio: &AudioBuffer,
    cfg: &EmbedConfig,
    options: &ExtractOptions,
) -> Result<ExtractReport> {
    cfg.validate()?;
    let hits = find_syncs(audio, cfg);
    if hits.is_empty() {
        return Err(Error::NoSyncFound);
    }

    let block = cfg.block_samples();
    let sync_region = block * cfg.sync.len();
    let payload_region = block * cfg.payload_bits_per_frame;
    let n = audio.samples.len();

    let mut report = ExtractReport {
        hits: Vec::new(),
        bits: Vec::new(),
        frames_decoded: 0,
        skipped_bits: Vec::new(),
    };

    for hit in hits {
        let alpha = if options.resynchronize { hit.alpha } else { 1.0 };
        let start = hit.start_sample + (alpha * sync_region as f64).round() as usize;
        let region = if options.resynchronize {
            let want = (alpha * payload_region as f64).round() as usize;
            let end = (start + want).min(n);
            if end <= start + 1 {
                continue;
            }
            let observed = &audio.samples[start..end];
            match resynchronize(observed, payload_region) {
                Ok(r) => r,
                Err(_) => continue,
            }
        } else {
            if start + payload_region > n {
                continue;
            }
            audio.samples[start..start + payload_region].to_vec()
        };

        for slot in 0..cfg.payload_bits_per_frame {
            let coeffs = low_band(&region[slot * block..(slot + 1) * block], cfg.levels)?;
            let total: f64 = coeffs.iter().map(|c| c.abs()).sum();
            if total < DEGENERATE_EPS {
                report
                    .skipped_bits
                    .push(report.frames_decoded * cfg.payload_bits_per_frame + slot);
            } else {
                report.bits.push(extract_bit(&coeffs)?);
            }
        }
        report.hits.push(hit);
        report.frames_decoded += 1;
    }

    if report.frames_decoded == 0 {
        return Err(Error::NoSyncFound);
    }
    Ok(report)
}
