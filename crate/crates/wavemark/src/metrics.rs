//! Quality and robustness measures: SNR, amplitude normalization, bit error
//! rate, and embedding capacity.

use crate::error::{Error, Result};

/// Signal-to-noise ratio in decibels. Identical signals yield the infinity
/// sentinel rather than an error, which keeps benchmark tables simple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrDb(pub f64);

impl SnrDb {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl std::fmt::Display for SnrDb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{:.2}", self.0)
        }
    }
}

/// SNR of `test` against `reference`:
/// `-10 log10(sum (f - f')^2 / sum f^2)`.
pub fn snr(reference: &[f64], test: &[f64]) -> Result<SnrDb> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: test.len() });
    }
    let signal: f64 = reference.iter().map(|x| x * x).sum();
    if signal == 0.0 {
        return Err(Error::AllZeroReference);
    }
    let noise: f64 = reference
        .iter()
        .zip(test)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if noise == 0.0 {
        return Ok(SnrDb(f64::INFINITY));
    }
    Ok(SnrDb(-10.0 * (noise / signal).log10()))
}

/// Rescales `test` so its absolute sum matches the reference's:
/// `f''(i) = f'(i) * sum|f| / sum|f'|`.
pub fn normalize_amplitude(reference: &[f64], test: &[f64]) -> Result<Vec<f64>> {
    let test_sum: f64 = test.iter().map(|x| x.abs()).sum();
    if test_sum == 0.0 {
        return Err(Error::AllZeroSignal);
    }
    let ref_sum: f64 = reference.iter().map(|x| x.abs()).sum();
    let gain = ref_sum / test_sum;
    Ok(test.iter().map(|x| x * gain).collect())
}

/// Bit error rate as a percentage of mismatching positions.
pub fn ber(sent: &[bool], received: &[bool]) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::LengthMismatch { left: sent.len(), right: received.len() });
    }
    if sent.is_empty() {
        return Err(Error::TooShort { min: 1 });
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / sent.len() as f64 * 100.0)
}

/// Embedding capacity in bits per second: `R / (3 L 2^K)`.
pub fn capacity(sample_rate: u32, levels: usize, group_len: usize) -> Result<f64> {
    if sample_rate == 0 {
        return Err(Error::InvalidSampleRate);
    }
    if levels == 0 || group_len == 0 {
        return Err(Error::InvalidParameter("levels and group length must be positive".into()));
    }
    Ok(sample_rate as f64 / (3.0 * group_len as f64 * 2f64.powi(levels as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_of_identical_signals_is_infinite() {
        let x = vec![0.3, -0.2, 0.9];
        assert!(snr(&x, &x).unwrap().is_infinite());
    }

    #[test]
    fn snr_of_halved_signal() {
        let x = vec![0.5, -0.25, 0.8, 0.1];
        let half: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        let s = snr(&x, &half).unwrap();
        assert!((s.0 - 6.020599913279624).abs() < 1e-12);
    }

    #[test]
    fn snr_of_one_percent_noise_energy() {
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
        let signal: f64 = x.iter().map(|v| v * v).sum();
        // Error vector with energy exactly 1% of the signal energy.
        let e = (0.01 * signal / n as f64).sqrt();
        let y: Vec<f64> = x.iter().map(|v| v + e).collect();
        let s = snr(&x, &y).unwrap();
        assert!((s.0 - 20.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn snr_errors() {
        assert!(snr(&[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(snr(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalization_undoes_pure_gain() {
        let x = vec![0.4, -0.9, 0.2, 0.05];
        for gain in [2.0, 0.5, 0.1, 7.3] {
            let scaled: Vec<f64> = x.iter().map(|v| v * gain).collect();
            let back = normalize_amplitude(&x, &scaled).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(snr(&x, &back).unwrap().is_infinite());
        }
    }

    #[test]
    fn normalization_scale_factor() {
        // sum|ref| = 10, sum|test| = 4 -> every sample scaled by 2.5.
        let reference = vec![10.0];
        let test = vec![1.0, -3.0];
        let out = normalize_amplitude(&reference, &test).unwrap();
        assert_eq!(out, vec![2.5, -7.5]);
    }

    #[test]
    fn normalization_rejects_zero_test() {
        assert!(normalize_amplitude(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ber_examples() {
        let a = [true, false, true, true];
        let b = [true, true, true, false];
        assert_eq!(ber(&a, &b).unwrap(), 50.0);
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        assert_eq!(ber(&a, &b).unwrap(), ber(&b, &a).unwrap());
        assert!(ber(&a, &b[..3]).is_err());
        assert!(ber(&[], &[]).is_err());
    }

    #[test]
    fn ber_table_arithmetic() {
        // One error in 1600 bits is the published 0.5-in-800 average: 0.0625%.
        let sent = vec![false; 1600];
        let mut recv = sent.clone();
        recv[123] = true;
        assert!((ber(&sent, &recv).unwrap() - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn capacity_values() {
        let c = capacity(44100, 6, 8).unwrap();
        assert!((c - 28.7109375).abs() < 1e-9);
        assert!((c - 28.71).abs() < 0.01);

        assert_eq!(capacity(3 * 8 * 64, 6, 8).unwrap(), 1.0);

        let low = capacity(8000, 6, 8).unwrap();
        assert!((low - 5.208333333333333).abs() < 1e-9);

        assert!(capacity(0, 6, 8).is_err());
        assert!(capacity(44100, 0, 8).is_err());
    }
}
