//! Deterministic synthetic emotional-speech corpus.
//!
//! Every utterance is a pitch-drifting harmonic stack. The emotion class
//! sets the fundamental range, the spectral tilt and the amplitude
//! modulation rate; each speaker shifts pitch and tilt; white noise is
//! added at a fixed SNR. Dimensional labels come from a per-class table
//! plus uniform jitter, quantized to half points.

use std::path::Path;

use emovae_core::corpus::{DialogueKind, EmotionClass, UtteranceRecord};
use emovae_core::dsp::{FftPlan, WaveBuffer};
use emovae_core::numeric::RngStream;
use serde::{Deserialize, Serialize};

use crate::manifest::write_manifest;
use crate::wav::write_wav;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_sessions: u32,
    pub speakers_per_session: u32,
    pub utterances_per_speaker: usize,
    pub sample_rate: u32,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub snr_db: f64,
    pub noise: NoiseShape,
    /// Half-width of the uniform jitter on dimensional labels.
    pub dimensional_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_sessions: 5,
            speakers_per_session: 2,
            utterances_per_speaker: 12,
            sample_rate: 16000,
            min_duration_s: 1.0,
            max_duration_s: 3.0,
            snr_db: 20.0,
            noise: NoiseShape::default(),
            dimensional_jitter: 0.8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sessions == 0 || self.speakers_per_session == 0 || self.utterances_per_speaker == 0 {
            return fail("sessions, speakers and utterances must be positive");
        }
        if !(self.min_duration_s >= 0.1 && self.min_duration_s <= self.max_duration_s) {
            return fail("durations need 0.1 ≤ min_duration_s ≤ max_duration_s");
        }
        if self.sample_rate < 8000 {
            return fail("sample_rate must be at least 8000");
        }
        if !self.snr_db.is_finite() || !(0.0..=2.0).contains(&self.dimensional_jitter) {
            return fail("snr_db must be finite and dimensional_jitter in [0, 2]");
        }
        Ok(())
    }
}

/// Spectrum of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    White,
    /// Power spectrum follows the utterance's harmonic envelope: flat below
    /// f0, falling as `(f/f0)^(−2·tilt)` above it.
    #[default]
    SpeechShaped,
}

/// Acoustic and dimensional signature of one emotion class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSignature {
    pub class: EmotionClass,
    pub f0_hz: (f64, f64),
    /// Harmonic `k` has amplitude `k^(−tilt)`.
    pub tilt: f64,
    pub am_rate_hz: f64,
    pub am_depth: f64,
    /// Mean arousal, power and valence on the 1–5 scale.
    pub apv: [f64; 3],
}

pub const SIGNATURES: [ClassSignature; 4] = [
    ClassSignature {
        class: EmotionClass::Neutral,
        f0_hz: (110.0, 150.0),
        tilt: 1.4,
        am_rate_hz: 3.0,
        am_depth: 0.4,
        apv: [3.0, 3.0, 3.0],
    },
    ClassSignature {
        class: EmotionClass::Happiness,
        f0_hz: (210.0, 280.0),
        tilt: 0.9,
        am_rate_hz: 5.5,
        am_depth: 0.6,
        apv: [3.8, 3.4, 4.2],
    },
    ClassSignature {
        class: EmotionClass::Sadness,
        f0_hz: (85.0, 115.0),
        tilt: 2.2,
        am_rate_hz: 1.5,
        am_depth: 0.3,
        apv: [2.0, 2.2, 2.0],
    },
    ClassSignature {
        class: EmotionClass::Anger,
        f0_hz: (160.0, 220.0),
        tilt: 0.4,
        am_rate_hz: 8.0,
        am_depth: 0.7,
        apv: [4.2, 4.0, 1.8],
    },
];

const MAX_HARMONIC_HZ: f64 = 7000.0;
const PITCH_DRIFT: f64 = 0.04;
const PITCH_DRIFT_HZ: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeakerProfile {
    pub pitch_factor: f64,
    pub tilt_offset: f64,
}

impl SpeakerProfile {
    fn draw(rng: &mut RngStream) -> Self {
        SpeakerProfile {
            pitch_factor: rng.uniform(0.85, 1.15),
            tilt_offset: rng.uniform(-0.15, 0.15),
        }
    }
}

/// A generated corpus held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub records: Vec<UtteranceRecord>,
    pub waves: Vec<WaveBuffer>,
    pub speakers: Vec<(String, SpeakerProfile)>,
}

fn quantize_half(v: f64) -> f64 {
    ((v * 2.0).round() / 2.0).clamp(1.0, 5.0)
}

/// Adds white Gaussian noise whose power sits `snr_db` below the signal's.
pub fn add_noise(samples: &mut [f64], snr_db: f64, rng: &mut RngStream) {
    let n = samples.len().max(1) as f64;
    let signal_power = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let noise_sd = (signal_power / libm::pow(10.0, snr_db / 10.0)).sqrt();
    for v in samples {
        *v += noise_sd * rng.standard_normal();
    }
}

/// Gaussian noise of length `n` whose power spectrum is flat below `f0`
/// and falls as `(f/f0)^(−2·tilt)` above it, scaled to unit mean power.
pub fn speech_shaped_noise(
    n: usize,
    f0: f64,
    tilt: f64,
    sample_rate: u32,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let m = n.max(2).next_power_of_two();
    let plan = FftPlan::new(m)?;
    let mut re: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
    let mut im = vec![0.0; m];
    plan.forward(&mut re, &mut im);
    let sr = f64::from(sample_rate);
    for j in 0..m {
        let f = j.min(m - j) as f64 * sr / m as f64;
        let g = if f <= f0 { 1.0 } else { libm::pow(f / f0, -tilt) };
        re[j] *= g;
        im[j] *= g;
    }
    // Inverse transform as the conjugate of a forward transform.
    im.iter_mut().for_each(|v| *v = -*v);
    plan.forward(&mut re, &mut im);
    re.truncate(n);
    let power = re.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    let scale = 1.0 / power.sqrt().max(1e-300);
    re.iter_mut().for_each(|v| *v *= scale);
    Ok(re)
}

/// Synthesizes one utterance.
pub fn synthesize(
    id: &str,
    sig: &ClassSignature,
    speaker: &SpeakerProfile,
    cfg: &SynthConfig,
    rng: &mut RngStream,
) -> Result<WaveBuffer> {
    let sr = f64::from(cfg.sample_rate);
    let duration = rng.uniform(cfg.min_duration_s, cfg.max_duration_s);
    let n = (duration * sr).round() as usize;
    let f0 = rng.uniform(sig.f0_hz.0, sig.f0_hz.1) * speaker.pitch_factor;
    let tilt = sig.tilt + speaker.tilt_offset;
    let n_harm = ((MAX_HARMONIC_HZ.min(0.45 * sr) / (f0 * (1.0 + PITCH_DRIFT))).floor() as usize).max(1);
    let amps: Vec<f64> = (1..=n_harm).map(|k| libm::pow(k as f64, -tilt)).collect();
    let drift_phase = rng.uniform(0.0, std::f64::consts::TAU);
    let am_phase = rng.uniform(0.0, std::f64::consts::TAU);
    let tau = std::f64::consts::TAU;
    let mut phase = rng.uniform(0.0, tau);
    let mut clean = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let f = f0 * (1.0 + PITCH_DRIFT * libm::sin(tau * PITCH_DRIFT_HZ * t + drift_phase));
        phase = (phase + tau * f / sr) % tau;
        // sin(kφ) by the Chebyshev recurrence sin((k+1)φ) = 2cosφ·sin(kφ) − sin((k−1)φ).
        let (s1, c1) = (libm::sin(phase), libm::cos(phase));
        let mut prev = 0.0;
        let mut cur = s1;
        let mut acc = 0.0;
        for a in &amps {
            acc += a * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        let env = 1.0 - sig.am_depth * 0.5 * (1.0 + libm::sin(tau * sig.am_rate_hz * t + am_phase));
        clean.push(acc * env);
    }
    let mut samples = clean;
    match cfg.noise {
        NoiseShape::White => add_noise(&mut samples, cfg.snr_db, rng),
        NoiseShape::SpeechShaped => {
            let noise = speech_shaped_noise(n, f0, tilt, cfg.sample_rate, rng)?;
            let signal_power = samples.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
            let sd = (signal_power / libm::pow(10.0, cfg.snr_db / 10.0)).sqrt();
            for (s, v) in samples.iter_mut().zip(noise) {
                *s += sd * v;
            }
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = 0.6 * libm::pow(10.0, rng.uniform(-6.0, 0.0) / 20.0) / peak.max(1e-12);
    for s in &mut samples {
        *s *= gain;
    }
    Ok(WaveBuffer::new(id, samples, cfg.sample_rate)?)
}

/// Generates the corpus in memory. Output depends only on `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let mut records = Vec::new();
    let mut waves = Vec::new();
    let mut speakers = Vec::new();
    for session in 1..=cfg.n_sessions {
        for spk in 0..cfg.speakers_per_session {
            let speaker = format!("Ses{session:02}_S{spk}");
            let profile = SpeakerProfile::draw(&mut root.fork_named(&format!("speaker/{speaker}")));
            speakers.push((speaker.clone(), profile));
            for j in 0..cfg.utterances_per_speaker {
                let sig = &SIGNATURES[j % SIGNATURES.len()];
                let kind = if (j / SIGNATURES.len()).is_multiple_of(2) {
                    DialogueKind::Improvised
                } else {
                    DialogueKind::Scripted
                };
                let id = format!("{speaker}_{j:03}");
                let mut rng = root.fork_named(&format!("utterance/{id}"));
                let wave = synthesize(&id, sig, &profile, cfg, &mut rng)?;
                let raw = match sig.class {
                    EmotionClass::Happiness if (j / SIGNATURES.len()) % 2 == 1 => "excited",
                    c => c.name(),
                };
                let mut label_rng = root.fork_named(&format!("labels/{id}"));
                let apv = sig.apv.map(|m| {
                    quantize_half(m + label_rng.uniform(-cfg.dimensional_jitter, cfg.dimensional_jitter))
                });
                records.push(UtteranceRecord {
                    id: id.clone(),
                    audio_path: format!("wav/{id}.wav"),
                    session,
                    speaker: speaker.clone(),
                    dialogue_kind: kind,
                    categorical_raw: raw.to_string(),
                    arousal: apv[0],
                    power: apv[1],
                    valence: apv[2],
                });
                waves.push(wave);
            }
        }
    }
    Ok(SyntheticCorpus {
        config: cfg.clone(),
        records,
        waves,
        speakers,
    })
}

/// Writes `manifest.csv`, `wav/<id>.wav` and `corpus_meta.json` under `out_dir`.
pub fn write_corpus(corpus: &SyntheticCorpus, out_dir: &Path) -> Result<()> {
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    for (r, w) in corpus.records.iter().zip(&corpus.waves) {
        write_wav(&out_dir.join(&r.audio_path), w)?;
    }
    write_manifest(&out_dir.join("manifest.csv"), &corpus.records)?;
    let meta = serde_json::json!({
        "generator": crate::BUILD_ID,
        "config": corpus.config,
        "class_signatures": SIGNATURES,
        "speakers": corpus.speakers.iter().map(|(name, p)| serde_json::json!({
            "speaker": name,
            "pitch_factor": p.pitch_factor,
            "tilt_offset": p.tilt_offset,
        })).collect::<Vec<_>>(),
        "n_utterances": corpus.records.len(),
    });
    let path = out_dir.join("corpus_meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn generate_synthetic_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<SyntheticCorpus> {
    let corpus = generate(cfg)?;
    write_corpus(&corpus, out_dir)?;
    Ok(corpus)
}
