//! Segment-level representation learners: a plain autoencoder (AE), a
//! variational autoencoder (VAE) and a label-conditioned VAE (CVAE), all with
//! hand-derived gradients.
//!
//! The VAE objective minimised per segment is
//! `|x − x̂|² + w·KL[N(μ, σ²) ‖ N(0, I)]`, where the latent sample is
//! `z = μ + δ ⊙ σ`, `δ ~ N(0, I)`. The CVAE concatenates a one-hot emotion
//! label to both the encoder input and the decoder input.

mod autoencoder;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

pub use autoencoder::{Autoencoder, Conditioning, EpochLoss, FitConfig, FitHistory};

use crate::layers::Activation;
use crate::numeric::{Matrix, RngStream};
use crate::{Error, Result};

/// Encoder log-variance outputs are clamped to this symmetric range.
pub const LOG_VAR_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Ae,
    Vae,
    Cvae,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ae => "ae",
            ModelKind::Vae => "vae",
            ModelKind::Cvae => "cvae",
        }
    }

    pub fn is_variational(self) -> bool {
        self != ModelKind::Ae
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ae" => Ok(ModelKind::Ae),
            "vae" => Ok(ModelKind::Vae),
            "cvae" => Ok(ModelKind::Cvae),
            other => Err(Error::Parameter(alloc::format!("unknown model kind {other:?}"))),
        }
    }
}

/// Architecture of an autoencoder. The decoder mirrors `hidden_dims` in
/// reverse and ends in a linear layer back to `input_dim`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct EncoderDecoderSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    /// Length of the one-hot condition; non-zero only for CVAE.
    pub condition_dim: usize,
    pub activation: Activation,
}

impl EncoderDecoderSpec {
    /// 800 inputs, encoder 512 → 256, latent 128, tanh; the CVAE is
    /// conditioned on `n_classes` labels.
    pub fn standard(kind: ModelKind, n_classes: usize) -> Self {
        EncoderDecoderSpec {
            kind,
            input_dim: 800,
            hidden_dims: vec![512, 256],
            latent_dim: 128,
            condition_dim: if kind == ModelKind::Cvae { n_classes } else { 0 },
            activation: Activation::Tanh,
        }
    }

    pub fn with_latent_dim(mut self, latent_dim: usize) -> Self {
        self.latent_dim = latent_dim;
        self
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.input_dim + self.condition_dim
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.latent_dim + self.condition_dim
    }

    pub fn decoder_hidden_dims(&self) -> Vec<usize> {
        self.hidden_dims.iter().rev().copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.input_dim == 0 {
            return Err(Error::Parameter("input_dim and latent_dim must be >= 1".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Parameter("hidden layer of width 0".into()));
        }
        match (self.kind, self.condition_dim) {
            (ModelKind::Cvae, 0) => Err(Error::Parameter(
                "cvae needs condition_dim = number of classes".into(),
            )),
            (ModelKind::Ae | ModelKind::Vae, n) if n != 0 => Err(Error::Parameter(alloc::format!(
                "{} takes no condition, got condition_dim {n}",
                self.kind.name()
            ))),
            _ => Ok(()),
        }
    }

    /// Length of an extracted feature vector under `mode`.
    pub fn feature_dim(&self, mode: FeatureMode) -> usize {
        match mode {
            FeatureMode::MuLogVar => 2 * self.latent_dim,
            FeatureMode::Mu | FeatureMode::Sample => self.latent_dim,
        }
    }
}

/// Distribution parameters emitted by the encoder. The AE has no variance
/// head, so `log_var` is `None` and `mu` holds its bottleneck code.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentParams {
    pub mu: Vec<f64>,
    pub log_var: Option<Vec<f64>>,
}

impl LatentParams {
    pub fn gaussian(mu: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mu.len() != log_var.len() {
            return Err(Error::Length {
                op: "LatentParams",
                expected: mu.len(),
                got: log_var.len(),
            });
        }
        Ok(LatentParams {
            mu,
            log_var: Some(log_var),
        })
    }
}

/// One-hot emotion label.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVector(Vec<f64>);

impl ConditionVector {
    pub fn one_hot(class: usize, n_classes: usize) -> Result<Self> {
        if class >= n_classes {
            return Err(Error::Parameter(alloc::format!(
                "class {class} out of range for {n_classes} classes"
            )));
        }
        let mut v = vec![0.0; n_classes];
        v[class] = 1.0;
        Ok(ConditionVector(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn class(&self) -> usize {
        self.0.iter().position(|&v| v == 1.0).unwrap_or(0)
    }
}

/// Batch of one-hot rows.
pub fn one_hot_matrix(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (r, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::Parameter(alloc::format!(
                "label {c} out of range for {n_classes} classes"
            )));
        }
        m.set(r, c, 1.0);
    }
    Ok(m)
}

/// Which encoder outputs become the segment's feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FeatureMode {
    /// `μ` only (the AE's bottleneck code).
    Mu,
    /// `[μ ‖ log σ²]`.
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "mu-logvar"))]
    MuLogVar,
    /// One reparameterized draw `μ + δ ⊙ σ`.
    Sample,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Mu => "mu",
            FeatureMode::MuLogVar => "mu-logvar",
            FeatureMode::Sample => "sample",
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mu" => Ok(FeatureMode::Mu),
            "mu-logvar" | "mu_logvar" => Ok(FeatureMode::MuLogVar),
            "sample" => Ok(FeatureMode::Sample),
            other => Err(Error::Parameter(alloc::format!("unknown feature mode {other:?}"))),
        }
    }
}

/// Learned representation of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeatures {
    pub utterance_id: String,
    pub segment_index: usize,
    pub values: Vec<f64>,
}

/// Reconstruction, KL and weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossComponents {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Closed-form `KL[N(μ, diag σ²) ‖ N(0, I)] = ½ Σ (μ² + σ² − 1 − log σ²)`.
/// Zero for the AE (no variance head).
pub fn kl_divergence(lp: &LatentParams) -> f64 {
    match &lp.log_var {
        None => 0.0,
        Some(lv) => kl_terms(&lp.mu, lv),
    }
}

pub(crate) fn kl_terms(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(&m, &lv)| m * m + libm::exp(lv) - 1.0 - lv)
        .sum::<f64>()
}

/// Per-segment loss: `recon = Σᵢ (xᵢ − x̂ᵢ)²`, `total = recon + kl_weight·kl`.
pub fn vae_loss(x: &[f64], x_hat: &[f64], lp: &LatentParams, kl_weight: f64) -> Result<LossComponents> {
    if x.len() != x_hat.len() {
        return Err(Error::Length {
            op: "vae_loss",
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    let recon = squared_distance(x, x_hat);
    let kl = kl_divergence(lp);
    Ok(LossComponents {
        total: recon + kl_weight * kl,
        recon,
        kl,
    })
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `z = μ + δ ⊙ exp(½ log σ²)` with fresh `δ ~ N(0, I)`.
pub fn reparameterize(lp: &LatentParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    let delta = rng.sample_standard_normal(lp.mu.len())?;
    reparameterize_with(lp, &delta)
}

/// Reparameterization with a caller-supplied `δ`.
pub fn reparameterize_with(lp: &LatentParams, delta: &[f64]) -> Result<Vec<f64>> {
    let log_var = lp
        .log_var
        .as_ref()
        .ok_or_else(|| Error::ModelKind("the AE has no variance head to sample from".into()))?;
    if delta.len() != lp.mu.len() || log_var.len() != lp.mu.len() {
        return Err(Error::Length {
            op: "reparameterize",
            expected: lp.mu.len(),
            got: delta.len(),
        });
    }
    let z: Vec<f64> = lp
        .mu
        .iter()
        .zip(log_var)
        .zip(delta)
        .map(|((&m, &lv), &d)| m + d * libm::exp(0.5 * lv))
        .collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "reparameterized latent".into(),
        });
    }
    Ok(z)
}
