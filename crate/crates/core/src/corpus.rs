//! Utterance metadata, label mapping, dimensional binning and fold plans.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::numeric::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EmotionClass {
    Neutral,
    Happiness,
    Sadness,
    Anger,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 4] = [
        EmotionClass::Neutral,
        EmotionClass::Happiness,
        EmotionClass::Sadness,
        EmotionClass::Anger,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionClass::Neutral => "neutral",
            EmotionClass::Happiness => "happiness",
            EmotionClass::Sadness => "sadness",
            EmotionClass::Anger => "anger",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DialogueKind {
    Improvised,
    Scripted,
}

impl DialogueKind {
    pub fn name(self) -> &'static str {
        match self {
            DialogueKind::Improvised => "improvised",
            DialogueKind::Scripted => "scripted",
        }
    }
}

impl FromStr for DialogueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "improvised" | "impro" => Ok(DialogueKind::Improvised),
            "scripted" | "script" => Ok(DialogueKind::Scripted),
            other => Err(Error::Validation(format!("unknown dialogue kind '{other}'"))),
        }
    }
}

/// One row of a corpus manifest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UtteranceRecord {
    pub id: String,
    pub audio_path: String,
    pub session: u32,
    pub speaker: String,
    pub dialogue_kind: DialogueKind,
    pub categorical_raw: String,
    pub arousal: f64,
    pub power: f64,
    pub valence: f64,
}

impl UtteranceRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("empty utterance id".into()));
        }
        if self.session == 0 {
            return Err(Error::Validation(format!(
                "{}: sessions are numbered from 1",
                self.id
            )));
        }
        for (name, v) in [
            ("arousal", self.arousal),
            ("power", self.power),
            ("valence", self.valence),
        ] {
            check_dimensional_range(v)
                .map_err(|_| Error::Validation(format!("{}: {name} = {v} is outside [1, 5]", self.id)))?;
        }
        Ok(())
    }

    pub fn dimension(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Arousal => self.arousal,
            Dimension::Power => self.power,
            Dimension::Valence => self.valence,
        }
    }
}

/// Rejects duplicate ids and invalid rows.
pub fn validate_records(records: &[UtteranceRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Validation(format!("duplicate utterance id '{}'", r.id)));
        }
    }
    Ok(())
}

/// Raw annotation label → kept class. Lookup is case-insensitive and
/// ignores surrounding whitespace; unknown labels are excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    entries: BTreeMap<String, EmotionClass>,
}

impl Default for LabelMap {
    fn default() -> Self {
        let mut lm = LabelMap {
            entries: BTreeMap::new(),
        };
        let table: [(&str, EmotionClass); 12] = [
            ("neutral", EmotionClass::Neutral),
            ("neu", EmotionClass::Neutral),
            ("happiness", EmotionClass::Happiness),
            ("happy", EmotionClass::Happiness),
            ("hap", EmotionClass::Happiness),
            ("excited", EmotionClass::Happiness),
            ("exc", EmotionClass::Happiness),
            ("sadness", EmotionClass::Sadness),
            ("sad", EmotionClass::Sadness),
            ("anger", EmotionClass::Anger),
            ("ang", EmotionClass::Anger),
            ("angry", EmotionClass::Anger),
        ];
        for (raw, class) in table {
            lm.insert(raw, class);
        }
        lm
    }
}

impl LabelMap {
    pub fn insert(&mut self, raw: &str, class: EmotionClass) {
        self.entries.insert(normalize_label(raw), class);
    }

    pub fn get(&self, raw: &str) -> Option<EmotionClass> {
        self.entries.get(&normalize_label(raw)).copied()
    }
}

fn normalize_label(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Kept class for `raw`, or `None` for labels outside the four classes.
pub fn map_categorical(raw: &str, lm: &LabelMap) -> Option<EmotionClass> {
    lm.get(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Dimension {
    Arousal,
    Power,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Arousal, Dimension::Power, Dimension::Valence];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Power => "power",
            Dimension::Valence => "valence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DimBin {
    Low,
    Mid,
    High,
}

impl DimBin {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }
}

fn check_dimensional_range(v: f64) -> Result<()> {
    if (1.0..=5.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "dimensional value {v} is outside [1, 5]"
        )))
    }
}

/// `< 3` low, `== 3` mid, `> 3` high, compared exactly.
pub fn bin_dimensional(value: f64) -> Result<DimBin> {
    check_dimensional_range(value)?;
    Ok(if value < 3.0 {
        DimBin::Low
    } else if value == 3.0 {
        DimBin::Mid
    } else {
        DimBin::High
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FoldScheme {
    /// One fold per session, ascending.
    Loso,
    KFold {
        k: usize,
        seed: u64,
    },
    /// A single fold training on `train_fraction` of the shuffled records.
    Holdout {
        train_fraction: f64,
        seed: u64,
    },
}

impl FoldScheme {
    pub fn name(&self) -> String {
        match self {
            FoldScheme::Loso => "loso".to_string(),
            FoldScheme::KFold { k, .. } => format!("kfold{k}"),
            FoldScheme::Holdout { train_fraction, .. } => format!("holdout{train_fraction}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    /// Positions into the record slice the plan was built from, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Session held out, for LOSO folds.
    pub session: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub folds: Vec<Fold>,
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let held: BTreeSet<usize> = test.iter().copied().collect();
    (0..n).filter(|i| !held.contains(i)).collect()
}

/// Deterministic `(train, test)` split of `0..n`; `test` takes
/// `round(n·(1−train_fraction))` items, at least one when `n ≥ 2`.
pub fn holdout_split(n: usize, train_fraction: f64, rng: &mut RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut n_test = libm::round(n as f64 * (1.0 - train_fraction)) as usize;
    if n >= 2 {
        n_test = n_test.clamp(1, n - 1);
    } else {
        n_test = 0;
    }
    let mut test = order[..n_test].to_vec();
    test.sort_unstable();
    (complement(n, &test), test)
}

pub fn make_folds(records: &[UtteranceRecord], scheme: FoldScheme) -> Result<FoldPlan> {
    let n = records.len();
    let folds = match scheme {
        FoldScheme::Loso => {
            let sessions: BTreeSet<u32> = records.iter().map(|r| r.session).collect();
            if sessions.len() < 2 {
                return Err(Error::Validation(format!(
                    "leave-one-session-out needs at least 2 sessions, found {}",
                    sessions.len()
                )));
            }
            sessions
                .into_iter()
                .map(|s| {
                    let test: Vec<usize> = (0..n).filter(|&i| records[i].session == s).collect();
                    Fold {
                        train: complement(n, &test),
                        test,
                        session: Some(s),
                    }
                })
                .collect()
        }
        FoldScheme::KFold { k, seed } => {
            if k < 2 || n < k {
                return Err(Error::Validation(format!(
                    "{k}-fold cross-validation needs k ≥ 2 and at least k records, found {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            RngStream::new(seed).shuffle(&mut order);
            (0..k)
                .map(|i| {
                    let mut test = order[i * n / k..(i + 1) * n / k].to_vec();
                    test.sort_unstable();
                    Fold {
                        train: complement(n, &test),
                        test,
                        session: None,
                    }
                })
                .collect()
        }
        FoldScheme::Holdout { train_fraction, seed } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) || n < 2 {
                return Err(Error::Validation(format!(
                    "holdout needs 0 < train_fraction < 1 and at least 2 records (fraction {train_fraction}, {n} records)"
                )));
            }
            let (train, test) = holdout_split(n, train_fraction, &mut RngStream::new(seed));
            alloc::vec![Fold {
                train,
                test,
                session: None,
            }]
        }
    };
    Ok(FoldPlan { scheme, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn record(id: &str, session: u32, label: &str) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            audio_path: format!("{id}.wav"),
            session,
            speaker: format!("s{session}"),
            dialogue_kind: DialogueKind::Improvised,
            categorical_raw: label.into(),
            arousal: 3.0,
            power: 2.5,
            valence: 3.5,
        }
    }

    #[test]
    fn label_mapping() {
        let lm = LabelMap::default();
        assert_eq!(map_categorical("excited", &lm), Some(EmotionClass::Happiness));
        assert_eq!(map_categorical("Excited ", &lm), Some(EmotionClass::Happiness));
        assert_eq!(map_categorical("neutral", &lm), Some(EmotionClass::Neutral));
        assert_eq!(map_categorical("NEU", &lm), Some(EmotionClass::Neutral));
        assert_eq!(map_categorical("ang", &lm), Some(EmotionClass::Anger));
        for raw in ["frustration", "surprise", "fear", "disgust", "other", ""] {
            assert_eq!(map_categorical(raw, &lm), None, "{raw}");
        }
        assert_eq!(EmotionClass::Happiness.index(), 1);
        assert_eq!(EmotionClass::from_index(3), Some(EmotionClass::Anger));
    }

    #[test]
    fn dimensional_bins() {
        assert_eq!(bin_dimensional(2.5).unwrap(), DimBin::Low);
        assert_eq!(bin_dimensional(3.0).unwrap(), DimBin::Mid);
        assert_eq!(bin_dimensional(3.5).unwrap(), DimBin::High);
        assert_eq!(bin_dimensional(1.0).unwrap(), DimBin::Low);
        assert_eq!(bin_dimensional(5.0).unwrap(), DimBin::High);
        assert_eq!(bin_dimensional(2.9999999999).unwrap(), DimBin::Low);
        assert!(bin_dimensional(0.5).is_err());
        assert!(bin_dimensional(7.0).is_err());
        assert!(bin_dimensional(f64::NAN).is_err());
    }

    #[test]
    fn record_validation() {
        let mut r = record("a", 1, "sad");
        assert!(r.validate().is_ok());
        r.arousal = 7.0;
        let err = r.validate().unwrap_err().to_string();
        assert!(err.contains("arousal"), "{err}");
        let dup = [record("x", 1, "sad"), record("x", 2, "sad")];
        let err = validate_records(&dup).unwrap_err().to_string();
        assert!(err.contains("'x'"), "{err}");
    }

    #[test]
    fn loso_tests_one_session_per_fold() {
        let records: Vec<_> = (0..20)
            .map(|i| record(&format!("u{i}"), 1 + i % 5, "sad"))
            .collect();
        let plan = make_folds(&records, FoldScheme::Loso).unwrap();
        assert_eq!(plan.folds.len(), 5);
        let mut covered = vec![0; records.len()];
        for (k, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.session, Some(k as u32 + 1));
            assert!(f.test.iter().all(|&i| records[i].session == k as u32 + 1));
            assert!(f.train.iter().all(|&i| records[i].session != k as u32 + 1));
            assert_eq!(f.train.len() + f.test.len(), records.len());
            for &i in &f.test {
                covered[i] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        assert!(make_folds(&records[..1], FoldScheme::Loso).is_err());
    }

    #[test]
    fn kfold_partitions_into_near_equal_shards() {
        let records: Vec<_> = (0..100).map(|i| record(&format!("u{i}"), 1, "sad")).collect();
        let plan = make_folds(&records, FoldScheme::KFold { k: 10, seed: 3 }).unwrap();
        assert_eq!(plan.folds.len(), 10);
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        assert!(plan
            .folds
            .iter()
            .all(|f| f.test.len() == 10 && f.train.len() == 90));
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let again = make_folds(&records, FoldScheme::KFold { k: 10, seed: 3 }).unwrap();
        assert_eq!(plan, again);
        let shards: Vec<usize> = make_folds(&records[..23], FoldScheme::KFold { k: 10, seed: 1 })
            .unwrap()
            .folds
            .iter()
            .map(|f| f.test.len())
            .collect();
        assert!(shards.iter().all(|&s| s == 2 || s == 3));
        assert!(make_folds(&records[..5], FoldScheme::KFold { k: 10, seed: 0 }).is_err());
    }

    #[test]
    fn holdout_keeps_ninety_percent() {
        let records: Vec<_> = (0..50).map(|i| record(&format!("u{i}"), 1, "sad")).collect();
        let plan = make_folds(
            &records,
            FoldScheme::Holdout {
                train_fraction: 0.9,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(plan.folds.len(), 1);
        assert_eq!(plan.folds[0].train.len(), 45);
        assert_eq!(plan.folds[0].test.len(), 5);
    }
}
