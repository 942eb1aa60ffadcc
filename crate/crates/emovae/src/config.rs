//! Declarative run configuration. Every field has a default; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use emovae_core::classifier::{Readout, TrainConfig};
use emovae_core::corpus::{DialogueKind, FoldScheme};
use emovae_core::dsp::LogMelConfig;
use emovae_core::layers::Activation;
use emovae_core::models::{EncoderDecoderSpec, FeatureMode, FitConfig, ModelKind};
use emovae_core::numeric::AdamConfig;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus manifest; relative audio paths resolve against its directory.
    pub manifest: Option<PathBuf>,
    pub logmel: LogMelConfig,
    pub model: ModelConfig,
    pub autoencoder: AutoencoderConfig,
    pub classifier: ClassifierConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    pub activation: Activation,
    pub feature_mode: FeatureMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Cvae,
            hidden_dims: vec![512, 256],
            latent_dim: 128,
            activation: Activation::Tanh,
            feature_mode: FeatureMode::MuLogVar,
        }
    }
}

/// Which condition the CVAE encoder sees when featurizing training
/// utterances. Test utterances are always featurized under every class and
/// averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvaeTrainFeatures {
    #[default]
    TrueLabel,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub recon_threshold: Option<f64>,
    pub kl_weight: f64,
    pub adam: AdamConfig,
    pub cvae_train_features: CvaeTrainFeatures,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            epochs: 10,
            batch_size: 128,
            recon_threshold: None,
            kl_weight: 1.0,
            adam: AdamConfig::default(),
            cvae_train_features: CvaeTrainFeatures::default(),
        }
    }
}

impl AutoencoderConfig {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            recon_threshold: self.recon_threshold,
            kl_weight: self.kl_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lstm_hidden: [usize; 2],
    pub readout: Readout,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Share of each training fold held out for early stopping.
    pub validation_fraction: f64,
    /// Standardize latent features with training-fold statistics.
    pub standardize_features: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lstm_hidden: [128, 128],
            readout: Readout::Final,
            max_epochs: 20,
            patience: 3,
            batch_size: 8,
            adam: AdamConfig::conventional(),
            validation_fraction: 0.1,
            standardize_features: true,
        }
    }
}

impl ClassifierConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub seeds: Vec<u64>,
    pub categorical_folds: FoldScheme,
    pub dimensional_folds: FoldScheme,
    /// Restricts the corpus to one dialogue kind before folding.
    pub subset: DataSubset,
    /// Label permutations used to estimate chance macro F1.
    pub chance_permutations: usize,
    pub save_checkpoints: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSubset {
    #[default]
    Complete,
    Improvised,
    Scripted,
}

impl DataSubset {
    pub fn admits(self, kind: DialogueKind) -> bool {
        match self {
            DataSubset::Complete => true,
            DataSubset::Improvised => kind == DialogueKind::Improvised,
            DataSubset::Scripted => kind == DialogueKind::Scripted,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            seeds: vec![1, 2, 3],
            categorical_folds: FoldScheme::Loso,
            dimensional_folds: FoldScheme::KFold { k: 10, seed: 0 },
            subset: DataSubset::Complete,
            chance_permutations: 100,
            save_checkpoints: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", origin.display(), e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Writes the resolved configuration as `<dir>/config.json`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.json");
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))
    }

    pub fn encoder_spec(&self, kind: ModelKind, n_classes: usize) -> EncoderDecoderSpec {
        EncoderDecoderSpec {
            kind,
            input_dim: self.logmel.segment_len(),
            hidden_dims: self.model.hidden_dims.clone(),
            latent_dim: self.model.latent_dim,
            condition_dim: if kind == ModelKind::Cvae { n_classes } else { 0 },
            activation: self.model.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Err(e) = self.encoder_spec(self.model.kind, 4).validate() {
            return fail(format!("model: {e}"));
        }
        if self.model.kind == ModelKind::Ae && self.model.feature_mode != FeatureMode::Mu {
            return fail(format!(
                "model: feature_mode '{}' needs a variational model; the AE only has 'mu'",
                self.model.feature_mode.name()
            ));
        }
        if let Err(e) = self.autoencoder.adam.validate() {
            return fail(format!("autoencoder.adam: {e}"));
        }
        if let Err(e) = self.classifier.adam.validate() {
            return fail(format!("classifier.adam: {e}"));
        }
        if self.autoencoder.epochs == 0 || self.autoencoder.batch_size == 0 {
            return fail("autoencoder: epochs and batch_size must be positive".into());
        }
        if self.classifier.max_epochs == 0 || self.classifier.batch_size == 0 {
            return fail("classifier: max_epochs and batch_size must be positive".into());
        }
        if !(self.classifier.validation_fraction >= 0.0 && self.classifier.validation_fraction < 1.0) {
            return fail("classifier.validation_fraction must be in [0, 1)".into());
        }
        if self.classifier.lstm_hidden.contains(&0) {
            return fail("classifier.lstm_hidden must be positive".into());
        }
        if self.evaluation.seeds.is_empty() {
            return fail("evaluation.seeds must not be empty".into());
        }
        if self.logmel.sample_rate == 0 || self.logmel.frames_per_segment == 0 {
            return fail("logmel: sample_rate and frames_per_segment must be positive".into());
        }
        Ok(())
    }

    /// The configuration with the model kind replaced; an AE falls back to
    /// `mu` features because it has no variance head.
    pub fn with_kind(&self, kind: ModelKind) -> Self {
        let mut cfg = self.clone();
        cfg.model.kind = kind;
        if kind == ModelKind::Ae {
            cfg.model.feature_mode = FeatureMode::Mu;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_published_configuration() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model.hidden_dims, vec![512, 256]);
        assert_eq!(cfg.model.latent_dim, 128);
        assert_eq!(cfg.logmel.segment_len(), 800);
        assert_eq!(cfg.logmel.n_mels, 80);
        assert_eq!(cfg.logmel.window_ms, 25.0);
        assert_eq!(cfg.logmel.hop_ms, 10.0);
        let adam = &cfg.autoencoder.adam;
        assert_eq!(
            (adam.beta1, adam.beta2, adam.epsilon, adam.learning_rate),
            (0.999, 0.99, 1e-8, 1e-3)
        );
        assert_eq!(cfg.classifier.adam.learning_rate, 1e-3);
        assert_eq!(cfg.classifier.max_epochs, 20);
        assert_eq!(cfg.classifier.lstm_hidden, [128, 128]);
        assert_eq!(cfg.evaluation.categorical_folds, FoldScheme::Loso);
        assert_eq!(
            cfg.evaluation.dimensional_folds,
            FoldScheme::KFold { k: 10, seed: 0 }
        );
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn empty_object_is_the_default() {
        let cfg = RunConfig::from_json("{}", Path::new("c.json")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.model.latent_dim = 32;
        cfg.evaluation.dimensional_folds = FoldScheme::Holdout {
            train_fraction: 0.9,
            seed: 4,
        };
        let back = RunConfig::from_json(&cfg.to_json(), Path::new("c.json")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err =
            RunConfig::from_json("{\n  \"model\": {\"latent\": 3}\n}", Path::new("c.json")).unwrap_err();
        assert!(err.is_usage());
        let msg = err.to_string();
        assert!(msg.contains("c.json:2:"), "{msg}");
        assert!(msg.contains("latent"), "{msg}");
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        let err = RunConfig::from_json("{\"model\": ", Path::new("c.json")).unwrap_err();
        assert!(err.is_usage());
        assert!(err.to_string().contains("c.json:1:"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"model": {"latent_dim": 0}}"#,
            r#"{"autoencoder": {"adam": {"beta1": 1.5}}}"#,
            r#"{"evaluation": {"seeds": []}}"#,
            r#"{"model": {"kind": "ae", "feature_mode": "mu-logvar"}}"#,
            r#"{"model": {"kind": "gan"}}"#,
        ] {
            let err = RunConfig::from_json(text, Path::new("c.json")).unwrap_err();
            assert!(err.is_usage(), "{text}: {err}");
        }
    }
}
