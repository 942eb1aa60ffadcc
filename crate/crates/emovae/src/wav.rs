//! 16-bit PCM mono WAV reading and writing.

use std::io::{Read, Seek, Write};
use std::path::Path;

use emovae_core::dsp::WaveBuffer;

use crate::{Error, Result};

const SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM WAV. Samples are mapped to `[-1, 1)` by
/// division by 32768.
pub fn read_wav(path: &Path) -> Result<WaveBuffer> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_wav_from(std::io::BufReader::new(file), path, &id)
}

pub fn read_wav_from<R: Read>(reader: R, path: &Path, id: &str) -> Result<WaveBuffer> {
    let unsupported = |detail: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        detail,
    };
    let wav = hound::WavReader::new(reader).map_err(|e| unsupported(e.to_string()))?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.channels != 1 {
        return Err(unsupported(format!(
            "expected mono, found {} channels",
            spec.channels
        )));
    }
    let samples = wav
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / SCALE))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| unsupported(e.to_string()))?;
    Ok(WaveBuffer::new(id, samples, spec.sample_rate)?)
}

/// Quantizes to 16-bit PCM with rounding and saturation.
pub fn quantize(sample: f64) -> i16 {
    (sample * SCALE)
        .round()
        .clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

pub fn write_wav(path: &Path, wave: &WaveBuffer) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav_to(std::io::BufWriter::new(file), wave).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other)),
    })
}

fn write_wav_to<W: Write + Seek>(writer: W, wave: &WaveBuffer) -> hound::Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec)?;
    for &s in &wave.samples {
        w.write_sample(quantize(s))?;
    }
    w.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_quantized_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let samples: Vec<f64> = (0..400).map(|i| 0.5 * (i as f64 * 0.07).sin()).collect();
        let wave = WaveBuffer::new("tone", samples.clone(), 16000).unwrap();
        write_wav(&path, &wave).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.id, "tone");
        for (a, b) in samples.iter().zip(&back.samples) {
            assert_eq!(*b, f64::from(quantize(*a)) / 32768.0);
            assert!((a - b).abs() <= 0.5 / 32768.0);
        }
    }

    #[test]
    fn full_scale_maps_into_unit_interval() {
        assert_eq!(quantize(-1.0), i16::MIN);
        assert_eq!(quantize(1.0), i16::MAX);
        assert_eq!(quantize(2.0), i16::MAX);
    }

    #[test]
    fn rejects_stereo_and_float() {
        let dir = tempfile::tempdir().unwrap();
        for (channels, bits, fmt) in [
            (2u16, 16u16, hound::SampleFormat::Int),
            (1, 32, hound::SampleFormat::Float),
            (1, 8, hound::SampleFormat::Int),
        ] {
            let path = dir.path().join("bad.wav");
            let spec = hound::WavSpec {
                channels,
                sample_rate: 16000,
                bits_per_sample: bits,
                sample_format: fmt,
            };
            let mut w = hound::WavWriter::create(&path, spec).unwrap();
            for _ in 0..channels {
                match fmt {
                    hound::SampleFormat::Float => w.write_sample(0.0f32).unwrap(),
                    _ if bits == 8 => w.write_sample(0i8).unwrap(),
                    _ => w.write_sample(0i16).unwrap(),
                }
            }
            w.finalize().unwrap();
            let err = read_wav(&path).unwrap_err();
            assert!(matches!(err, Error::UnsupportedFormat { .. }), "{err}");
        }
    }

    #[test]
    fn garbage_is_unsupported() {
        let err = read_wav_from(&b"not a wav file"[..], Path::new("x.wav"), "x").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { .. }));
    }
}
