use alloc::vec::Vec;

use crate::numeric::Matrix;
use crate::{Error, Result};

/// `mel(f) = 2595·log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular filters over the non-negative FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_filters: usize,
    /// `n_filters × (n_fft/2 + 1)`.
    pub weights: Matrix,
    pub fmin: f64,
    pub fmax: f64,
}

/// `n_filters` unit-height triangles whose peaks are equally spaced on the
/// mel scale strictly between `mel(fmin)` and `mel(fmax)`; filter `j` rises
/// from the previous peak (or `fmin`) and falls to the next (or `fmax`).
/// Weights are the continuous triangle sampled at each bin's centre
/// frequency `k·sr/n_fft`.
pub fn build_mel_filterbank(
    n_filters: usize,
    n_fft: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterbank> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if n_filters == 0 {
        return Err(Error::Parameter("n_filters must be >= 1".into()));
    }
    if !(0.0 <= fmin && fmin < fmax) {
        return Err(Error::Parameter(alloc::format!(
            "need 0 <= fmin < fmax, got fmin={fmin}, fmax={fmax}"
        )));
    }
    if fmax > nyquist {
        return Err(Error::Parameter(alloc::format!(
            "fmax {fmax} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();
    let mut weights = Matrix::zeros(n_filters, n_bins);
    for j in 0..n_filters {
        let (left, centre, right) = (edges[j], edges[j + 1], edges[j + 2]);
        let row = weights.row_mut(j);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * f64::from(sample_rate) / n_fft as f64;
            let rising = (f - left) / (centre - left);
            let falling = (right - f) / (right - centre);
            *w = rising.min(falling).max(0.0);
        }
    }
    Ok(MelFilterbank {
        n_filters,
        weights,
        fmin,
        fmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_reference_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 1e-2);
        assert!((hz_to_mel(700.0) - 2595.0 * libm::log10(2.0)).abs() < 1e-12);
        for f in [0.0, 100.0, 1234.5, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn default_bank_invariants() {
        let fb = build_mel_filterbank(80, 512, 16_000, 0.0, 8000.0).unwrap();
        assert_eq!(fb.weights.shape(), (80, 257));
        assert!(fb.weights.as_slice().iter().all(|&w| w >= 0.0 && w <= 1.0));
        for j in 0..80 {
            let row = fb.weights.row(j);
            assert!(row.iter().any(|&w| w > 0.0), "filter {j} empty");
            // unimodal: non-decreasing up to the max, non-increasing after
            let peak = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0;
            assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
        }
        for k in 1..256 {
            let total: f64 = (0..80).map(|j| fb.weights.get(j, k)).sum();
            assert!(total > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(build_mel_filterbank(80, 512, 16_000, 0.0, 8001.0).is_err());
        assert!(build_mel_filterbank(80, 512, 16_000, 500.0, 400.0).is_err());
        assert!(build_mel_filterbank(0, 512, 16_000, 0.0, 8000.0).is_err());
    }
}
