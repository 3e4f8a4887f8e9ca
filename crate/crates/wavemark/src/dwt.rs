//! K-level Daubechies-2 (four-tap) discrete wavelet transform with periodic
//! boundary extension.
//!
//! Periodic extension makes the finite-length transform exactly orthogonal,
//! which the embedder relies on: energy is preserved across bands, and edits
//! confined to the approximation band never leak into the detail bands.

use crate::error::{Error, Result};

// Daubechies-2 analysis lowpass taps h = (1±√3)/(4√2), (3±√3)/(4√2).
const LO: [f64; 4] = [
    0.48296291314453414337,
    0.83651630373780790558,
    0.22414386804201338103,
    -0.12940952255126038117,
];
// Highpass taps g[m] = (-1)^m * h[3-m].
const HI: [f64; 4] = [LO[3], -LO[2], LO[1], -LO[0]];

/// Output of a K-level decomposition.
///
/// `approx` holds the coarsest (low-frequency) band; `details` holds one band
/// per level, coarsest first and finest last.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtPyramid {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub levels: usize,
    pub original_length: usize,
}

/// Decomposes `samples` into a K-level pyramid.
///
/// The length must be divisible by 2^K; the transform rejects bad lengths
/// rather than padding silently.
pub fn forward_dwt(samples: &[f64], levels: usize) -> Result<DwtPyramid> {
    check_length(samples.len(), levels)?;
    let mut approx = samples.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analyze(&approx);
        approx = a;
        details.push(d);
    }
    details.reverse(); // coarsest first, finest last
    Ok(DwtPyramid { approx, details, levels, original_length: samples.len() })
}

/// Reconstructs the signal from a pyramid; exact inverse of [`forward_dwt`].
pub fn inverse_dwt(pyr: &DwtPyramid) -> Result<Vec<f64>> {
    check_pyramid(pyr)?;
    let mut x = pyr.approx.clone();
    for detail in &pyr.details {
        x = synthesize(&x, detail);
    }
    Ok(x)
}

/// Computes only the coarsest approximation band of a K-level decomposition.
///
/// Identical to `forward_dwt(samples, levels)?.approx` but skips the detail
/// bands; the synchronization search calls this once per candidate block.
pub(crate) fn low_band(samples: &[f64], levels: usize) -> Result<Vec<f64>> {
    check_length(samples.len(), levels)?;
    let mut approx = samples.to_vec();
    for _ in 0..levels {
        approx = analyze_low(&approx);
    }
    Ok(approx)
}

fn check_length(len: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    if levels >= usize::BITS as usize {
        return Err(Error::InvalidParameter(format!("levels {levels} too large")));
    }
    let block = 1usize << levels;
    if len == 0 || len % block != 0 {
        return Err(Error::BadTransformLength { len, levels });
    }
    Ok(())
}

fn check_pyramid(pyr: &DwtPyramid) -> Result<()> {
    if pyr.levels == 0 || pyr.details.len() != pyr.levels {
        return Err(Error::InconsistentPyramid(format!(
            "{} detail bands for {} levels",
            pyr.details.len(),
            pyr.levels
        )));
    }
    check_length(pyr.original_length, pyr.levels)?;
    let mut expect = pyr.original_length >> pyr.levels;
    if pyr.approx.len() != expect {
        return Err(Error::InconsistentPyramid(format!(
            "approx band has {} coefficients, expected {}",
            pyr.approx.len(),
            expect
        )));
    }
    for (i, d) in pyr.details.iter().enumerate() {
        if d.len() != expect {
            return Err(Error::InconsistentPyramid(format!(
                "detail band {} has {} coefficients, expected {}",
                i,
                d.len(),
                expect
            )));
        }
        expect *= 2;
    }
    Ok(())
}

fn analyze(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for k in 0..half {
        let i0 = 2 * k;
        let (x0, x1, x2, x3) = taps_at(x, n, i0);
        approx.push(LO[0] * x0 + LO[1] * x1 + LO[2] * x2 + LO[3] * x3);
        detail.push(HI[0] * x0 + HI[1] * x1 + HI[2] * x2 + HI[3] * x3);
    }
    (approx, detail)
}

fn analyze_low(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    for k in 0..half {
        let (x0, x1, x2, x3) = taps_at(x, n, 2 * k);
        approx.push(LO[0] * x0 + LO[1] * x1 + LO[2] * x2 + LO[3] * x3);
    }
    approx
}

#[inline]
fn taps_at(x: &[f64], n: usize, i0: usize) -> (f64, f64, f64, f64) {
    if i0 + 3 < n {
        (x[i0], x[i0 + 1], x[i0 + 2], x[i0 + 3])
    } else {
        // Periodic wrap at the tail.
        (x[i0 % n], x[(i0 + 1) % n], x[(i0 + 2) % n], x[(i0 + 3) % n])
    }
}

fn synthesize(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let mut x = vec![0.0; n];
    for k in 0..half {
        let a = approx[k];
        let d = detail[k];
        let i0 = 2 * k;
        if i0 + 3 < n {
            x[i0] += LO[0] * a + HI[0] * d;
            x[i0 + 1] += LO[1] * a + HI[1] * d;
            x[i0 + 2] += LO[2] * a + HI[2] * d;
            x[i0 + 3] += LO[3] * a + HI[3] * d;
        } else {
            for m in 0..4 {
                x[(i0 + m) % n] += LO[m] * a + HI[m] * d;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_signal(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sum_sq(xs: &[f64]) -> f64 {
        xs.iter().map(|x| x * x).sum()
    }

    #[test]
    fn constant_signal_single_level() {
        // Hand evaluation: the four lowpass taps sum to √2, the highpass taps
        // cancel, so a constant 1.0 becomes approx = √2 and details = 0.
        let pyr = forward_dwt(&[1.0; 8], 1).unwrap();
        for &a in &pyr.approx {
            assert!((a - std::f64::consts::SQRT_2).abs() < 1e-15, "approx {a}");
        }
        for &d in &pyr.details[0] {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let pyr = forward_dwt(&[0.0; 64], 3).unwrap();
        assert!(pyr.approx.iter().all(|&a| a == 0.0));
        assert!(pyr.details.iter().flatten().all(|&d| d == 0.0));
        let back = inverse_dwt(&pyr).unwrap();
        assert!(back.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn parseval_energy_preservation() {
        let x = random_signal(512, 7);
        let pyr = forward_dwt(&x, 6).unwrap();
        let coeff_energy: f64 =
            sum_sq(&pyr.approx) + pyr.details.iter().map(|d| sum_sq(d)).sum::<f64>();
        let rel = (coeff_energy - sum_sq(&x)).abs() / sum_sq(&x);
        assert!(rel < 1e-9, "relative energy error {rel}");
    }

    #[test]
    fn perfect_reconstruction() {
        let x = random_signal(1536, 21);
        let pyr = forward_dwt(&x, 6).unwrap();
        let back = inverse_dwt(&pyr).unwrap();
        let max_err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-9, "max reconstruction error {max_err}");
    }

    #[test]
    fn band_lengths_and_order() {
        let pyr = forward_dwt(&random_signal(1536, 3), 6).unwrap();
        assert_eq!(pyr.approx.len(), 24);
        let lens: Vec<usize> = pyr.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![24, 48, 96, 192, 384, 768]); // coarsest first
    }

    #[test]
    fn approx_edits_stay_out_of_detail_bands() {
        let x = random_signal(1536, 11);
        let mut pyr = forward_dwt(&x, 6).unwrap();
        let original_details = pyr.details.clone();
        for (i, c) in pyr.approx.iter_mut().enumerate() {
            *c *= 1.0 + 0.05 * ((i % 7) as f64 - 3.0);
        }
        let rebuilt = inverse_dwt(&pyr).unwrap();
        let again = forward_dwt(&rebuilt, 6).unwrap();
        for (before, after) in original_details.iter().zip(&again.details) {
            for (a, b) in before.iter().zip(after) {
                assert!((a - b).abs() < 1e-9, "detail leakage {}", (a - b).abs());
            }
        }
        for (a, b) in pyr.approx.iter().zip(&again.approx) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn circular_block_delay_rotates_approx() {
        let k = 6;
        let step = 1usize << k;
        let x = random_signal(1536, 5);
        let mut delayed = vec![0.0; x.len()];
        for i in 0..x.len() {
            delayed[(i + step) % x.len()] = x[i];
        }
        let a = forward_dwt(&x, k).unwrap().approx;
        let b = forward_dwt(&delayed, k).unwrap().approx;
        // Same products in the same order, so the rotation is bit-exact.
        for i in 0..a.len() {
            assert_eq!(a[i], b[(i + 1) % b.len()]);
        }
    }

    #[test]
    fn low_band_matches_full_transform() {
        let x = random_signal(1536, 13);
        assert_eq!(low_band(&x, 6).unwrap(), forward_dwt(&x, 6).unwrap().approx);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(
            forward_dwt(&[1.0; 100], 6),
            Err(Error::BadTransformLength { len: 100, levels: 6 })
        ));
        assert!(forward_dwt(&[], 1).is_err());
        assert!(forward_dwt(&[1.0; 8], 0).is_err());
    }

    #[test]
    fn rejects_inconsistent_pyramid() {
        let mut pyr = forward_dwt(&random_signal(64, 1), 3).unwrap();
        pyr.details[1].pop();
        assert!(matches!(inverse_dwt(&pyr), Err(Error::InconsistentPyramid(_))));

        let mut pyr2 = forward_dwt(&random_signal(64, 2), 3).unwrap();
        pyr2.levels = 2;
        assert!(inverse_dwt(&pyr2).is_err());
    }
}
