//! LogMel front end: Hamming-windowed 25 ms frames every 10 ms, power
//! spectrum, 80 triangular mel filters, natural-log band energies, then
//! non-overlapping 10-frame (100 ms, 800-value) segments.

mod fft;
mod mel;

use alloc::string::String;
use alloc::vec::Vec;

pub use fft::FftPlan;
pub use mel::{build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilterbank};

use crate::numeric::Matrix;
use crate::{Error, Result};

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBuffer {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample_rate must be > 0".into()));
        }
        Ok(WaveBuffer {
            id: id.into(),
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Log mel-band energies of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelFrame {
    pub energies: Vec<f64>,
}

/// `frames_per_segment` consecutive frames flattened frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSegment {
    pub values: Vec<f64>,
    pub utterance_id: String,
    pub segment_index: usize,
}

impl LogMelSegment {
    /// Splits the flat vector back into frames of `n_bands` values.
    pub fn frames(&self, n_bands: usize) -> Vec<LogMelFrame> {
        self.values
            .chunks(n_bands)
            .map(|c| LogMelFrame { energies: c.to_vec() })
            .collect()
    }
}

pub(crate) fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    libm::round(ms * f64::from(sample_rate) / 1000.0) as usize
}

/// `w[k] = 0.54 − 0.46·cos(2πk/(n−1))`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Parameter(alloc::format!(
            "hamming window needs n >= 2, got {n}"
        )));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|k| 0.54 - 0.46 * libm::cos(2.0 * core::f64::consts::PI * k as f64 / denom))
        .collect())
}

/// Cuts the signal into unpadded frames of `win_ms` every `hop_ms`:
/// `1 + ⌊(N − win)/hop⌋` rows of `win` samples each.
pub fn frame_signal(wave: &WaveBuffer, win_ms: f64, hop_ms: f64) -> Result<Matrix> {
    let win = ms_to_samples(win_ms, wave.sample_rate);
    let hop = ms_to_samples(hop_ms, wave.sample_rate);
    if win == 0 || hop == 0 {
        return Err(Error::Parameter("window and hop must span >= 1 sample".into()));
    }
    let n = wave.samples.len();
    if n < win {
        return Err(Error::TooShort {
            id: wave.id.clone(),
            needed: win,
            got: n,
            unit: "samples",
        });
    }
    let count = 1 + (n - win) / hop;
    let mut frames = Matrix::zeros(count, win);
    for i in 0..count {
        frames
            .row_mut(i)
            .copy_from_slice(&wave.samples[i * hop..i * hop + win]);
    }
    Ok(frames)
}

/// `|DFT[k]|²` for `k = 0..=n_fft/2`, the frame zero-padded to `n_fft`.
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>> {
    FftPlan::new(n_fft)?.power(frame)
}

/// `energies[j] = ln(max(Σₖ fb[j,k]·power[k], floor))`.
pub fn logmel_frame(power: &[f64], fb: &MelFilterbank, floor: f64) -> Result<LogMelFrame> {
    let w = &fb.weights;
    if power.len() != w.cols() {
        return Err(Error::Length {
            op: "logmel_frame",
            expected: w.cols(),
            got: power.len(),
        });
    }
    let energies = (0..w.rows())
        .map(|j| {
            let e: f64 = w.row(j).iter().zip(power).map(|(a, b)| a * b).sum();
            libm::log(e.max(floor))
        })
        .collect();
    Ok(LogMelFrame { energies })
}

/// Groups frames into non-overlapping segments of `frames_per_segment`,
/// dropping a trailing partial group.
pub fn segment_utterance(
    utterance_id: &str,
    frames: &[LogMelFrame],
    frames_per_segment: usize,
) -> Result<Vec<LogMelSegment>> {
    if frames_per_segment == 0 {
        return Err(Error::Parameter("frames_per_segment must be >= 1".into()));
    }
    if frames.len() < frames_per_segment {
        return Err(Error::TooShort {
            id: utterance_id.into(),
            needed: frames_per_segment,
            got: frames.len(),
            unit: "frames",
        });
    }
    Ok(frames
        .chunks_exact(frames_per_segment)
        .enumerate()
        .map(|(i, group)| LogMelSegment {
            values: group.iter().flat_map(|f| f.energies.iter().copied()).collect(),
            utterance_id: utterance_id.into(),
            segment_index: i,
        })
        .collect())
}

/// Front-end parameters. Defaults: 16 kHz, 25 ms / 10 ms, 512-point FFT,
/// 80 bands from 0 Hz to Nyquist, floor 1e-10, 10 frames per segment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// `None` means Nyquist.
    pub fmax: Option<f64>,
    pub energy_floor: f64,
    pub frames_per_segment: usize,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        LogMelConfig {
            sample_rate: 16_000,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 512,
            n_mels: 80,
            fmin: 0.0,
            fmax: None,
            energy_floor: 1e-10,
            frames_per_segment: 10,
        }
    }
}

impl LogMelConfig {
    pub fn segment_len(&self) -> usize {
        self.n_mels * self.frames_per_segment
    }
}

/// Precomputed window, FFT plan and filterbank for a [`LogMelConfig`].
#[derive(Debug, Clone)]
pub struct LogMelExtractor {
    config: LogMelConfig,
    window: Vec<f64>,
    plan: FftPlan,
    filterbank: MelFilterbank,
}

impl LogMelExtractor {
    pub fn new(config: LogMelConfig) -> Result<Self> {
        let win = ms_to_samples(config.window_ms, config.sample_rate);
        if config.n_fft < win {
            return Err(Error::Parameter(alloc::format!(
                "n_fft {} shorter than window {win}",
                config.n_fft
            )));
        }
        let fmax = config.fmax.unwrap_or(f64::from(config.sample_rate) / 2.0);
        let filterbank =
            build_mel_filterbank(config.n_mels, config.n_fft, config.sample_rate, config.fmin, fmax)?;
        Ok(LogMelExtractor {
            window: hamming_window(win)?,
            plan: FftPlan::new(config.n_fft)?,
            filterbank,
            config,
        })
    }

    pub fn config(&self) -> &LogMelConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn frames(&self, wave: &WaveBuffer) -> Result<Vec<LogMelFrame>> {
        if wave.sample_rate != self.config.sample_rate {
            return Err(Error::Parameter(alloc::format!(
                "utterance {:?} is {} Hz, extractor expects {} Hz",
                wave.id,
                wave.sample_rate,
                self.config.sample_rate
            )));
        }
        let frames = frame_signal(wave, self.config.window_ms, self.config.hop_ms)?;
        let mut windowed = alloc::vec![0.0; frames.cols()];
        (0..frames.rows())
            .map(|i| {
                for ((o, &s), &w) in windowed.iter_mut().zip(frames.row(i)).zip(&self.window) {
                    *o = s * w;
                }
                let power = self.plan.power(&windowed)?;
                logmel_frame(&power, &self.filterbank, self.config.energy_floor)
            })
            .collect()
    }

    pub fn segments(&self, wave: &WaveBuffer) -> Result<Vec<LogMelSegment>> {
        let frames = self.frames(wave)?;
        segment_utterance(&wave.id, &frames, self.config.frames_per_segment)
    }
}

/// Per-column z-scoring with statistics from a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Columns whose standard deviation is below this are only centred.
    pub const MIN_STD: f64 = 1e-8;

    pub fn fit(data: &Matrix) -> Result<Self> {
        let n = data.rows();
        if n == 0 {
            return Err(Error::EmptyDataset("standardizer fit"));
        }
        let cols = data.cols();
        let mut mean = alloc::vec![0.0; cols];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(data.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = alloc::vec![0.0; cols];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd < Self::MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn transform_inplace(&self, data: &mut Matrix) -> Result<()> {
        if data.cols() != self.mean.len() {
            return Err(Error::Length {
                op: "standardize",
                expected: self.mean.len(),
                got: data.cols(),
            });
        }
        for r in 0..data.rows() {
            for ((v, m), s) in data.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn silence(n: usize) -> WaveBuffer {
        WaveBuffer::new("u", vec![0.0; n], 16_000).unwrap()
    }

    #[test]
    fn frame_counts() {
        assert_eq!(frame_signal(&silence(400), 25.0, 10.0).unwrap().rows(), 1);
        assert_eq!(frame_signal(&silence(560), 25.0, 10.0).unwrap().rows(), 2);
        let one_second = frame_signal(&silence(16_000), 25.0, 10.0).unwrap();
        assert_eq!(one_second.shape(), (98, 400));
    }

    #[test]
    fn too_short_signal_carries_id() {
        let w = WaveBuffer::new("Ses01_x", vec![0.0; 399], 16_000).unwrap();
        match frame_signal(&w, 25.0, 10.0) {
            Err(Error::TooShort { id, needed, got, .. }) => {
                assert_eq!((id.as_str(), needed, got), ("Ses01_x", 400, 399));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frames_start_at_hop_multiples() {
        let w = WaveBuffer::new("r", (0..1000).map(f64::from).collect(), 16_000).unwrap();
        let f = frame_signal(&w, 25.0, 10.0).unwrap();
        for i in 0..f.rows() {
            assert_eq!(f.get(i, 0), (i * 160) as f64);
        }
    }

    #[test]
    fn hamming_properties() {
        for n in [2usize, 5, 400, 401] {
            let w = hamming_window(n).unwrap();
            assert!((w[0] - 0.08).abs() < 1e-15);
            assert!((w[n - 1] - 0.08).abs() < 1e-12);
            for k in 0..n {
                assert!((w[k] - w[n - 1 - k]).abs() < 1e-12);
            }
            if n % 2 == 1 {
                assert!((w[(n - 1) / 2] - 1.0).abs() < 1e-15);
            }
        }
        assert!(hamming_window(1).is_err());
    }

    #[test]
    fn spectrum_of_constant_frame() {
        let n = 64;
        let c = 0.3;
        let p = power_spectrum(&vec![c; n], n).unwrap();
        assert_eq!(p.len(), n / 2 + 1);
        assert!((p[0] - (n as f64 * c).powi(2)).abs() < 1e-9);
        assert!(p[1..].iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn spectrum_of_bin_centred_cosine() {
        let n = 512;
        let k0 = 37;
        let x: Vec<f64> = (0..n)
            .map(|t| libm::cos(2.0 * core::f64::consts::PI * (k0 * t) as f64 / n as f64))
            .collect();
        let p = power_spectrum(&x, n).unwrap();
        let expected = (n as f64 / 2.0).powi(2);
        assert!((p[k0] - expected).abs() < 1e-6 * expected);
        let rest: f64 = p
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != k0)
            .map(|(_, v)| v)
            .sum();
        assert!(rest < 1e-9);
    }

    #[test]
    fn zero_frame_zero_spectrum_and_size_checks() {
        assert!(power_spectrum(&[0.0; 400], 512)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(power_spectrum(&[0.0; 400], 256).is_err());
    }

    #[test]
    fn parseval_with_rectangular_window() {
        let mut rng = crate::numeric::RngStream::new(17);
        let n = 512;
        let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let p = power_spectrum(&x, n).unwrap();
        let full: f64 = p[0] + p[n / 2] + 2.0 * p[1..n / 2].iter().sum::<f64>();
        let energy: f64 = n as f64 * x.iter().map(|v| v * v).sum::<f64>();
        assert!((full - energy).abs() / energy < 1e-6);
    }

    #[test]
    fn logmel_examples() {
        let fb = build_mel_filterbank(80, 512, 16_000, 0.0, 8000.0).unwrap();
        let floor = 1e-10;
        let zero = logmel_frame(&vec![0.0; 257], &fb, floor).unwrap();
        assert!(zero.energies.iter().all(|&e| e == libm::log(floor)));
        let ones = logmel_frame(&vec![1.0; 257], &fb, floor).unwrap();
        for j in 0..80 {
            let s: f64 = fb.weights.row(j).iter().sum();
            assert!((ones.energies[j] - libm::log(s)).abs() < 1e-12);
        }
        let twos = logmel_frame(&vec![2.0; 257], &fb, floor).unwrap();
        for j in 0..80 {
            assert!((twos.energies[j] - ones.energies[j] - core::f64::consts::LN_2).abs() < 1e-12);
        }
        assert!(logmel_frame(&vec![0.0; 256], &fb, floor).is_err());
    }

    fn frames(n: usize) -> Vec<LogMelFrame> {
        (0..n)
            .map(|i| LogMelFrame {
                energies: (0..80).map(|b| (i * 1000 + b) as f64).collect(),
            })
            .collect()
    }

    #[test]
    fn segmentation() {
        let segs = segment_utterance("u", &frames(98), 10).unwrap();
        assert_eq!(segs.len(), 9);
        let one = segment_utterance("u", &frames(10), 10).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].values.len(), 800);
        assert!(matches!(
            segment_utterance("u", &frames(9), 10),
            Err(Error::TooShort { .. })
        ));
        let src = frames(25);
        let segs = segment_utterance("u", &src, 10).unwrap();
        for (s, seg) in segs.iter().enumerate() {
            assert_eq!(seg.segment_index, s);
            assert_eq!(seg.frames(80), src[s * 10..(s + 1) * 10].to_vec());
        }
    }

    fn tone(amplitude: f64) -> WaveBuffer {
        let samples = (0..8000)
            .map(|t| amplitude * libm::sin(2.0 * core::f64::consts::PI * 440.0 * t as f64 / 16_000.0))
            .collect();
        WaveBuffer::new("tone", samples, 16_000).unwrap()
    }

    #[test]
    fn amplitude_scaling_shifts_log_energies() {
        let ex = LogMelExtractor::new(LogMelConfig::default()).unwrap();
        let floor_ln = libm::log(ex.config().energy_floor);
        let alpha: f64 = 0.25;
        let a = ex.frames(&tone(0.8)).unwrap();
        let b = ex.frames(&tone(0.8 * alpha)).unwrap();
        let shift = 2.0 * libm::log(alpha);
        let mut checked = 0;
        for (fa, fb) in a.iter().zip(&b) {
            for (ea, eb) in fa.energies.iter().zip(&fb.energies) {
                if *ea > floor_ln + 1.0 && *eb > floor_ln + 1.0 {
                    assert!((eb - ea - shift).abs() < 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn extraction_is_deterministic_and_floored() {
        let ex = LogMelExtractor::new(LogMelConfig::default()).unwrap();
        let s1 = ex.segments(&tone(0.5)).unwrap();
        let s2 = ex.segments(&tone(0.5)).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 4); // 48 frames in 0.5 s
        let floor_ln = libm::log(1e-10);
        assert!(s1
            .iter()
            .flat_map(|s| &s.values)
            .all(|&v| v.is_finite() && v >= floor_ln));
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let m = Matrix::from_rows(&[[1.0, 5.0, 2.0], [3.0, 5.0, 4.0], [5.0, 5.0, 9.0]]).unwrap();
        let st = Standardizer::fit(&m).unwrap();
        let mut t = m.clone();
        st.transform_inplace(&mut t).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| t.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            if c != 1 {
                let var = col.iter().map(|v| v * v).sum::<f64>() / 3.0;
                assert!((var - 1.0).abs() < 1e-12);
            }
        }
        assert!(col_is_zero(&t, 1));
    }

    fn col_is_zero(m: &Matrix, c: usize) -> bool {
        (0..m.rows()).all(|r| m.get(r, c) == 0.0)
    }
}
