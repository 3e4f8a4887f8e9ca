//! Synchronization codes: m-sequence generation, threshold matching, and the
//! false-positive / false-negative error analytics of the frame search.

use crate::error::{Error, Result};

/// Fibonacci-LFSR feedback taps per register degree, expressed as the set of
/// state bits XORed into the new high bit. Entry for degree m realizes a
/// primitive polynomial, so the output period is 2^m - 1. Degree 5 is the
/// default code: x^5 + x^2 + 1 with an all-ones seed.
const PRIMITIVE_TAPS: &[(u32, u32)] = &[
    (2, 0b11),
    (3, 0b011),
    (4, 0b011),
    (5, 0b00101),             // x^5 + x^2 + 1
    (6, 0b000011),
    (7, 0b0000011),           // x^7 + x + 1
    (8, 0b01110001),          // x^8 + x^6 + x^5 + x^4 + 1
    (9, 0b000010001),         // x^9 + x^4 + 1
    (10, 0b0000001001),       // x^10 + x^3 + 1
    (11, 0b00000000101),      // x^11 + x^2 + 1
    (12, 0b001010011),        // x^12 + x^6 + x^4 + x + 1
];

/// A fixed synchronization bit pattern marking the start of each frame.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SyncCode {
    bits: Vec<bool>,
}

impl SyncCode {
    /// Generates one full period of a maximal-length LFSR sequence.
    ///
    /// The register is seeded all-ones and the low bit is emitted before each
    /// shift, so the code is fully determined by the degree; the default
    /// degree 5 yields the 31-bit code shared by embedder and extractor.
    pub fn msequence(degree: u32) -> Result<Self> {
        if degree < 2 {
            return Err(Error::BadLfsrDegree(degree));
        }
        let taps = PRIMITIVE_TAPS
            .iter()
            .find(|(d, _)| *d == degree)
            .map(|(_, t)| *t)
            .ok_or(Error::UnsupportedLfsrDegree(degree))?;
        let period = (1u32 << degree) - 1;
        let mut state: u32 = (1 << degree) - 1;
        let mut bits = Vec::with_capacity(period as usize);
        for _ in 0..period {
            bits.push(state & 1 == 1);
            let fb = (state & taps).count_ones() & 1;
            state = (state >> 1) | (fb << (degree - 1));
        }
        Ok(SyncCode { bits })
    }

    /// Builds a code from explicit bits (for experimentation).
    pub fn from_bits(bits: Vec<bool>) -> Self {
        SyncCode { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl Default for SyncCode {
    fn default() -> Self {
        SyncCode::msequence(5).expect("degree 5 is always available")
    }
}

/// Counts differing positions between two equal-length bit sequences.
pub fn hamming_distance(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// True when `candidate` is within `threshold` mismatches of `code`
/// (inclusive).
pub fn is_sync(candidate: &[bool], code: &SyncCode, threshold: usize) -> Result<bool> {
    Ok(hamming_distance(candidate, code.bits())? <= threshold)
}

/// Probability that a uniformly random sequence of length `code_len` passes
/// the threshold test: 2^-Ns * sum_{k<=T} C(Ns, k).
///
/// The binomial sum is carried in exact integer arithmetic before the final
/// division, so printed tables are reproducible to the last digit.
pub fn false_positive_prob(code_len: u32, threshold: u32) -> Result<f64> {
    if code_len == 0 || code_len > 64 {
        return Err(Error::InvalidParameter(format!(
            "code length {code_len} out of supported range 1..=64"
        )));
    }
    if threshold >= code_len {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} must be below code length {code_len}"
        )));
    }
    let mut sum: u128 = 0;
    for k in 0..=threshold {
        sum += binomial(code_len, k);
    }
    Ok(sum as f64 / 2f64.powi(code_len as i32))
}

/// Probability that a genuine code is missed when each bit flips
/// independently with probability `bit_error_prob`:
/// sum_{k>T} C(Ns, k) p^k (1-p)^(Ns-k).
pub fn false_negative_prob(code_len: u32, threshold: u32, bit_error_prob: f64) -> Result<f64> {
    if code_len == 0 || code_len > 64 {
        return Err(Error::InvalidParameter(format!(
            "code length {code_len} out of supported range 1..=64"
        )));
    }
    if !(0.0..=1.0).contains(&bit_error_prob) {
        return Err(Error::InvalidParameter(format!(
            "bit error probability {bit_error_prob} outside [0, 1]"
        )));
    }
    let p = bit_error_prob;
    let mut total = 0.0;
    for k in (threshold + 1)..=code_len {
        let c = binomial(code_len, k) as f64;
        total += c * p.powi(k as i32) * (1.0 - p).powi((code_len - k) as i32);
    }
    Ok(total.min(1.0))
}

/// Watermark-channel bit error probability given the false-positive rate of
/// the sync search: (1 - P1) * Pd + P1 * 0.5. Bits decoded after a false
/// sync are coin flips.
pub fn channel_bit_error_prob(false_positive: f64, detector_bit_error: f64) -> Result<f64> {
    for p in [false_positive, detector_bit_error] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
        }
    }
    Ok((1.0 - false_positive) * detector_bit_error + false_positive * 0.5)
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
