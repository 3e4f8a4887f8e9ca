//! Channel simulation: the DA/AD conversion model (linear temporal scaling,
//! amplitude scaling, additive noise) plus a small catalog of common signal
//! processing attacks for robustness benchmarking.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wav::AudioBuffer;

/// Parameters of one simulated DA/AD pass:
/// `f'(i) = amplitude_scale * f(i / temporal_scale) + noise`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Output length ratio; soundcard drift stays within [0.995, 1.005].
    pub temporal_scale: f64,
    /// Gain applied by the analog loop, typically in [0.5, 2.0].
    pub amplitude_scale: f64,
    /// SNR of the added white Gaussian noise relative to the scaled signal
    /// power; `None` disables noise.
    pub noise_snr_db: Option<f64>,
    /// Seed for the noise generator; the output is a pure function of the
    /// spec.
    pub rng_seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            temporal_scale: 1.0,
            amplitude_scale: 1.0,
            noise_snr_db: Some(30.0),
            rng_seed: 0,
        }
    }
}

impl ChannelSpec {
    /// Draws a spec from the bands observed across consumer soundcards:
    /// temporal scale in [0.995, 1.005], gain in [0.5, 2.0], 30 dB noise.
    pub fn sample<R: Rng>(rng: &mut R) -> ChannelSpec {
        ChannelSpec {
            temporal_scale: rng.random_range(0.995..=1.005),
            amplitude_scale: rng.random_range(0.5..=2.0),
            noise_snr_db: Some(30.0),
            rng_seed: rng.random(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temporal_scale > 0.0) || !self.temporal_scale.is_finite() {
            return Err(Error::InvalidParameter("temporal scale must be positive".into()));
        }
        if !(self.amplitude_scale > 0.0) || !self.amplitude_scale.is_finite() {
            return Err(Error::InvalidParameter("amplitude scale must be positive".into()));
        }
        if let Some(snr) = self.noise_snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter("noise SNR must be finite".into()));
            }
        }
        Ok(())
    }
}

/// One entry of the attack catalog.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum AttackSpec {
    /// Multiply every sample by `gain`.
    AmplitudeScale { gain: f64 },
    /// Add white Gaussian noise at the given SNR.
    Awgn { snr_db: f64, seed: u64 },
    /// Round samples to a `bits`-deep grid and back.
    Requantize { bits: u32 },
    /// Resample to `rate_hz` and back with linear interpolation.
    Resample { rate_hz: u32 },
    /// Windowed-sinc lowpass FIR at `cutoff_hz` (order 127, Hamming window).
    Lowpass { cutoff_hz: f64 },
}

/// Simulates one DA/AD conversion pass.
///
/// The output has `round(temporal_scale * len)` samples, taken from the
/// input by linear interpolation at positions `i / temporal_scale`, scaled
/// by the gain, with seeded white Gaussian noise added at the requested SNR.
/// An identity spec returns the input samples exactly.
pub fn simulate_daad(audio: &AudioBuffer, spec: &ChannelSpec) -> Result<AudioBuffer> {
    spec.validate()?;
    if audio.is_empty() {
        return Err(Error::TooShort { min: 1 });
    }
    let out_len = (spec.temporal_scale * audio.len() as f64).round() as usize;
    let mut samples = resample_by_positions(&audio.samples, out_len, 1.0 / spec.temporal_scale);
    if spec.amplitude_scale != 1.0 {
        for s in &mut samples {
            *s *= spec.amplitude_scale;
        }
    }
    if let Some(snr_db) = spec.noise_snr_db {
        add_awgn(&mut samples, snr_db, spec.rng_seed);
    }
    Ok(AudioBuffer { samples, sample_rate: audio.sample_rate })
}

/// Applies one catalog attack.
pub fn apply_attack(audio: &AudioBuffer, spec: &AttackSpec) -> Result<AudioBuffer> {
    let samples = match *spec {
        AttackSpec::AmplitudeScale { gain } => {
            if !(gain > 0.0) || !gain.is_finite() {
                return Err(Error::InvalidParameter("gain must be positive".into()));
            }
            if gain == 1.0 {
                audio.samples.clone()
            } else {
                audio.samples.iter().map(|s| s * gain).collect()
            }
        }
        AttackSpec::Awgn { snr_db, seed } => {
            if !snr_db.is_finite() {
                return Err(Error::InvalidParameter("noise SNR must be finite".into()));
            }
            let mut out = audio.samples.clone();
            add_awgn(&mut out, snr_db, seed);
            out
        }
        AttackSpec::Requantize { bits } => {
            if !(2..=32).contains(&bits) {
                return Err(Error::InvalidParameter(format!(
                    "requantization depth {bits} outside 2..=32"
                )));
            }
            let scale = 2f64.powi(bits as i32 - 1);
            audio
                .samples
                .iter()
                .map(|s| (s * scale).round().clamp(-scale, scale - 1.0) / scale)
                .collect()
        }
        AttackSpec::Resample { rate_hz } => {
            if rate_hz == 0 {
                return Err(Error::InvalidParameter("intermediate rate must be positive".into()));
            }
            let down = rate_hz as f64 / audio.sample_rate as f64;
            let mid_len = ((audio.len() as f64 * down).round() as usize).max(1);
            let mid = resample_by_positions(&audio.samples, mid_len, 1.0 / down);
            resample_by_positions(&mid, audio.len(), mid_len as f64 / audio.len() as f64)
        }
        AttackSpec::Lowpass { cutoff_hz } => {
            let nyquist = audio.sample_rate as f64 / 2.0;
            if !(cutoff_hz > 0.0) || cutoff_hz >= nyquist {
                return Err(Error::InvalidParameter(format!(
                    "cutoff {cutoff_hz} Hz outside (0, Nyquist)"
                )));
            }
            fir_lowpass(&audio.samples, cutoff_hz / audio.sample_rate as f64)
        }
    };
    Ok(AudioBuffer { samples, sample_rate: audio.sample_rate })
}

/// Samples `input` at positions `i * step` by linear interpolation; exact
/// copy when `step == 1`.
fn resample_by_positions(input: &[f64], out_len: usize, step: f64) -> Vec<f64> {
    let n = input.len();
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * step;
        let j = (pos.floor() as usize).min(n - 1);
        let frac = pos - j as f64;
        if frac == 0.0 || j + 1 >= n {
            out.push(input[j]);
        } else {
            out.push((1.0 - frac) * input[j] + frac * input[j + 1]);
        }
    }
    out
}

fn add_awgn(samples: &mut [f64], snr_db: f64, seed: u64) {
    let power: f64 =
        samples.iter().map(|s| s * s).sum::<f64>() / samples.len().max(1) as f64;
    if power == 0.0 {
        return;
    }
    let noise_power = power / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, noise_power.sqrt()).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in samples.iter_mut() {
        *s += normal.sample(&mut rng);
    }
}

// 128-tap Hamming-windowed sinc, unity DC gain, group delay compensated to
// the nearest sample.
fn fir_lowpass(input: &[f64], normalized_cutoff: f64) -> Vec<f64> {
    const ORDER: usize = 127;
    let taps: Vec<f64> = (0..=ORDER)
        .map(|m| {
            let centered = m as f64 - ORDER as f64 / 2.0;
            let sinc = if centered == 0.0 {
                2.0 * normalized_cutoff
            } else {
                (2.0 * std::f64::consts::PI * normalized_cutoff * centered).sin()
                    / (std::f64::consts::PI * centered)
            };
            let window = 0.54
                - 0.46 * (2.0 * std::f64::consts::PI * m as f64 / ORDER as f64).cos();
            sinc * window
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    let delay = (ORDER + 1) / 2;
    let n = input.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (m, t) in taps.iter().enumerate() {
            let idx = i as i64 + delay as i64 - m as i64;
            if idx >= 0 && (idx as usize) < n {
                acc += t * input[idx as usize];
            }
        }
        *o = acc / gain;
    }
    out
}
