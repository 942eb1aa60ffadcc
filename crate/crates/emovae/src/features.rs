//! Utterance records paired with their LogMel segment matrices.

use std::path::Path;

use emovae_core::corpus::{map_categorical, validate_records, LabelMap, UtteranceRecord};
use emovae_core::dsp::{LogMelConfig, LogMelExtractor, Standardizer, WaveBuffer};
use emovae_core::numeric::Matrix;
use serde_json::json;

use crate::container::Container;
use crate::manifest::{load_manifest, resolve_audio_path};
use crate::wav::read_wav;
use crate::{Error, Result};

/// Records and, for each, an `n_segments × segment_len` matrix.
/// Utterances too short for a single segment are dropped and listed in
/// `skipped`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub logmel: LogMelConfig,
    pub records: Vec<UtteranceRecord>,
    pub segments: Vec<Matrix>,
    pub skipped: Vec<String>,
}

fn segment_matrix(extractor: &LogMelExtractor, wave: &WaveBuffer) -> Result<Option<Matrix>> {
    let segs = match extractor.segments(wave) {
        Ok(s) if !s.is_empty() => s,
        Ok(_) | Err(emovae_core::Error::TooShort { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let rows: Vec<&[f64]> = segs.iter().map(|s| s.values.as_slice()).collect();
    Ok(Some(Matrix::from_rows(&rows)?))
}

impl Dataset {
    /// Featurizes in-memory waves, one per record, in record order.
    pub fn from_waves(
        records: &[UtteranceRecord],
        waves: &[WaveBuffer],
        logmel: &LogMelConfig,
    ) -> Result<Self> {
        if records.len() != waves.len() {
            return Err(Error::Config(format!(
                "{} records but {} waves",
                records.len(),
                waves.len()
            )));
        }
        validate_records(records)?;
        let extractor = LogMelExtractor::new(logmel.clone())?;
        let mut ds = Dataset {
            logmel: logmel.clone(),
            records: Vec::new(),
            segments: Vec::new(),
            skipped: Vec::new(),
        };
        for (r, w) in records.iter().zip(waves) {
            let m = segment_matrix(&extractor, w).map_err(|e| e.context(format!("utterance '{}'", r.id)))?;
            ds.push(r.clone(), m);
        }
        Ok(ds)
    }

    /// Loads a manifest and featurizes every referenced WAV file.
    pub fn from_manifest(path: &Path, logmel: &LogMelConfig) -> Result<Self> {
        let records = load_manifest(path)?;
        let extractor = LogMelExtractor::new(logmel.clone())?;
        let mut ds = Dataset {
            logmel: logmel.clone(),
            records: Vec::new(),
            segments: Vec::new(),
            skipped: Vec::new(),
        };
        for r in records {
            let wav_path = resolve_audio_path(path, &r);
            let mut wave = read_wav(&wav_path)?;
            wave.id = r.id.clone();
            let m = segment_matrix(&extractor, &wave)
                .map_err(|e| e.context(format!("{}", wav_path.display())))?;
            ds.push(r, m);
        }
        Ok(ds)
    }

    fn push(&mut self, record: UtteranceRecord, m: Option<Matrix>) {
        match m {
            Some(m) => {
                self.records.push(record);
                self.segments.push(m);
            }
            None => self.skipped.push(record.id),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.iter().map(Matrix::rows).sum()
    }

    /// The subset at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            logmel: self.logmel.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            segments: indices.iter().map(|&i| self.segments[i].clone()).collect(),
            skipped: self.skipped.clone(),
        }
    }

    /// Segment cache: one tensor per utterance, named by its id, with the
    /// records and front-end configuration in the header.
    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(json!({
            "kind": "segments",
            "logmel": self.logmel,
            "records": self.records,
            "skipped": self.skipped,
        }));
        for (r, m) in self.records.iter().zip(&self.segments) {
            c.push(r.id.clone(), m.clone())?;
        }
        Ok(c)
    }

    pub fn from_container(c: &Container, path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Container {
            path: path.to_path_buf(),
            detail,
        };
        if c.meta.get("kind").and_then(|v| v.as_str()) != Some("segments") {
            return Err(bad("not a segment cache".into()));
        }
        let field = |name: &str| c.meta.get(name).cloned().unwrap_or_default();
        let logmel: LogMelConfig =
            serde_json::from_value(field("logmel")).map_err(|e| bad(format!("logmel: {e}")))?;
        let records: Vec<UtteranceRecord> =
            serde_json::from_value(field("records")).map_err(|e| bad(format!("records: {e}")))?;
        let skipped: Vec<String> =
            serde_json::from_value(field("skipped")).map_err(|e| bad(format!("skipped: {e}")))?;
        let segments = records
            .iter()
            .map(|r| {
                c.get(&r.id)
                    .cloned()
                    .ok_or_else(|| bad(format!("missing tensor for '{}'", r.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            logmel,
            records,
            segments,
            skipped,
        })
    }
}

/// Pairwise L2 distances between per-class mean segments after z-scoring
/// every segment column over the whole dataset. Entry `[a][b]` is `None`
/// when either class has no segments.
pub fn class_template_distances(ds: &Dataset, labels: &LabelMap) -> Result<Vec<Vec<Option<f64>>>> {
    let n_classes = emovae_core::corpus::EmotionClass::COUNT;
    let all: Vec<&[f64]> = ds
        .segments
        .iter()
        .flat_map(|m| (0..m.rows()).map(move |r| m.row(r)))
        .collect();
    let stacked = Matrix::from_rows(&all)?;
    let standardizer = Standardizer::fit(&stacked)?;
    let dim = stacked.cols();
    let mut sums = vec![vec![0.0; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (r, m) in ds.records.iter().zip(&ds.segments) {
        let Some(class) = map_categorical(&r.categorical_raw, labels) else {
            continue;
        };
        let mut z = m.clone();
        standardizer.transform_inplace(&mut z)?;
        for row in 0..z.rows() {
            for (s, v) in sums[class.index()].iter_mut().zip(z.row(row)) {
                *s += v;
            }
        }
        counts[class.index()] += z.rows();
    }
    let means: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    Ok((0..n_classes)
        .map(|a| {
            (0..n_classes)
                .map(|b| match (&means[a], &means[b]) {
                    (Some(x), Some(y)) => Some(
                        x.iter()
                            .zip(y)
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum::<f64>()
                            .sqrt(),
                    ),
                    _ => None,
                })
                .collect()
        })
        .collect())
}
