use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    one_hot_matrix, ConditionVector, EncoderDecoderSpec, FeatureMode, LatentFeatures, LatentParams,
    LossComponents, ModelKind, LOG_VAR_CLAMP,
};
use crate::dsp::LogMelSegment;
use crate::layers::{Activation, Dense};
use crate::numeric::{AdamConfig, Matrix, Parameter, ParameterSet, RngStream};
use crate::{Error, Result};

/// AE, VAE or CVAE over fixed-length segment vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    spec: EncoderDecoderSpec,
    encoder: Vec<Dense>,
    /// μ head for VAE/CVAE, the bottleneck code layer for the AE.
    mu_head: Dense,
    log_var_head: Option<Dense>,
    /// Mirrored hidden layers followed by the linear output layer.
    decoder: Vec<Dense>,
}

/// Label information supplied at feature-extraction time.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning<'a> {
    None,
    /// One ground-truth class per row.
    Labels(&'a [usize]),
    /// Extract under every class and average the feature vectors.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after the first epoch whose mean reconstruction loss falls
    /// below this value. `None` trains for all epochs.
    pub recon_threshold: Option<f64>,
    pub kl_weight: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 20,
            batch_size: 128,
            recon_threshold: None,
            kl_weight: 1.0,
        }
    }
}

pub type EpochLoss = LossComponents;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitHistory {
    pub epochs: Vec<EpochLoss>,
    pub stopped_early: bool,
}

/// Everything the backward pass needs from a forward pass.
struct Pass {
    enc_in: Matrix,
    enc_out: Vec<Matrix>,
    mu: Matrix,
    log_var_raw: Option<Matrix>,
    log_var: Option<Matrix>,
    delta: Option<Matrix>,
    dec_in: Matrix,
    dec_out: Vec<Matrix>,
}

impl Pass {
    fn x_hat(&self) -> &Matrix {
        self.dec_out.last().expect("decoder has an output layer")
    }
}

impl Autoencoder {
    /// Initializes every layer from its own stream forked off `rng` by layer
    /// name, so shared layers get identical weights across model kinds.
    pub fn new(spec: EncoderDecoderSpec, rng: &RngStream) -> Result<Self> {
        spec.validate()?;
        let layer = |name: &str, i: usize, o: usize| Dense::glorot(name, i, o, &mut rng.fork_named(name));
        let mut encoder = Vec::new();
        let mut width = spec.encoder_input_dim();
        for (i, &h) in spec.hidden_dims.iter().enumerate() {
            encoder.push(layer(&format!("encoder.{i}"), width, h));
            width = h;
        }
        let mu_head = layer("mu", width, spec.latent_dim);
        let log_var_head = spec
            .kind
            .is_variational()
            .then(|| layer("log_var", width, spec.latent_dim));
        let mut decoder = Vec::new();
        let mut width = spec.decoder_input_dim();
        for (i, h) in spec.decoder_hidden_dims().into_iter().enumerate() {
            decoder.push(layer(&format!("decoder.{i}"), width, h));
            width = h;
        }
        let out_index = decoder.len();
        decoder.push(layer(&format!("decoder.{out_index}"), width, spec.input_dim));
        Ok(Autoencoder {
            spec,
            encoder,
            mu_head,
            log_var_head,
            decoder,
        })
    }

    /// Rebuilds a model from named tensors (as produced by
    /// [`ParameterSet::parameters`]). Every parameter must be present with
    /// the right shape.
    pub fn from_named_tensors<'a, I>(spec: EncoderDecoderSpec, tensors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Matrix)>,
    {
        let mut model = Autoencoder::new(spec, &RngStream::new(0))?;
        let mut seen = vec![false; model.parameters().len()];
        for (name, value) in tensors {
            let mut params = model.parameters_mut();
            let (idx, p) = params
                .iter_mut()
                .enumerate()
                .find(|(_, p)| p.name == name)
                .ok_or_else(|| Error::Validation(format!("unknown tensor {name:?}")))?;
            if p.value.shape() != value.shape() {
                return Err(Error::dim("load tensor", p.value.shape(), value.shape()));
            }
            **p = Parameter::new(name, value);
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let name = model.parameters()[i].name.clone();
            return Err(Error::Validation(format!("missing tensor {name:?}")));
        }
        Ok(model)
    }

    pub fn spec(&self) -> &EncoderDecoderSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    fn check_condition(&self, rows: usize, cond: Option<&Matrix>) -> Result<()> {
        match (self.spec.kind, cond) {
            (ModelKind::Cvae, Some(c)) => {
                if c.shape() != (rows, self.spec.condition_dim) {
                    return Err(Error::dim(
                        "condition",
                        c.shape(),
                        (rows, self.spec.condition_dim),
                    ));
                }
                Ok(())
            }
            (ModelKind::Cvae, None) => Err(Error::ModelKind("cvae requires a condition vector".into())),
            (kind, Some(_)) => Err(Error::ModelKind(format!(
                "{} does not take a condition vector",
                kind.name()
            ))),
            (_, None) => Ok(()),
        }
    }

    fn with_condition(x: &Matrix, cond: Option<&Matrix>) -> Result<Matrix> {
        match cond {
            Some(c) => x.hcat(c),
            None => Ok(x.clone()),
        }
    }

    fn encode_pass(&self, x: &Matrix, cond: Option<&Matrix>) -> Result<(Matrix, Vec<Matrix>)> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::Length {
                op: "encode",
                expected: self.spec.input_dim,
                got: x.cols(),
            });
        }
        self.check_condition(x.rows(), cond)?;
        let enc_in = Self::with_condition(x, cond)?;
        let mut outs: Vec<Matrix> = Vec::with_capacity(self.encoder.len());
        for layer in &self.encoder {
            let input = outs.last().unwrap_or(&enc_in);
            let mut h = layer.forward(input)?;
            self.spec.activation.apply_inplace(&mut h);
            outs.push(h);
        }
        Ok((enc_in, outs))
    }

    fn heads(&self, h: &Matrix) -> Result<(Matrix, Option<Matrix>, Option<Matrix>)> {
        let mu = self.mu_head.forward(h)?;
        let (raw, clamped) = match &self.log_var_head {
            Some(head) => {
                let raw = head.forward(h)?;
                let mut lv = raw.clone();
                for v in lv.as_mut_slice() {
                    *v = v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP);
                }
                (Some(raw), Some(lv))
            }
            None => (None, None),
        };
        Ok((mu, raw, clamped))
    }

    fn decode_pass(&self, dec_in: &Matrix) -> Result<Vec<Matrix>> {
        let mut outs: Vec<Matrix> = Vec::with_capacity(self.decoder.len());
        let last = self.decoder.len() - 1;
        for (i, layer) in self.decoder.iter().enumerate() {
            let input = outs.last().unwrap_or(dec_in);
            let mut h = layer.forward(input)?;
            if i != last {
                self.spec.activation.apply_inplace(&mut h);
            }
            outs.push(h);
        }
        Ok(outs)
    }

    /// Full forward pass. With `delta = None` a variational model decodes
    /// from `z = μ`.
    fn forward(&self, x: &Matrix, cond: Option<&Matrix>, delta: Option<&Matrix>) -> Result<Pass> {
        let (enc_in, enc_out) = self.encode_pass(x, cond)?;
        let (mu, log_var_raw, log_var) = self.heads(enc_out.last().unwrap_or(&enc_in))?;
        let delta = match (&log_var, delta) {
            (Some(_), Some(d)) => {
                if d.shape() != mu.shape() {
                    return Err(Error::dim("delta", d.shape(), mu.shape()));
                }
                Some(d.clone())
            }
            _ => None,
        };
        let z = match (&log_var, &delta) {
            (Some(lv), Some(d)) => {
                let mut z = mu.clone();
                for ((zi, &l), &di) in z.as_mut_slice().iter_mut().zip(lv.as_slice()).zip(d.as_slice()) {
                    *zi += di * libm::exp(0.5 * l);
                }
                z
            }
            _ => mu.clone(),
        };
        let dec_in = Self::with_condition(&z, cond)?;
        let dec_out = self.decode_pass(&dec_in)?;
        Ok(Pass {
            enc_in,
            enc_out,
            mu,
            log_var_raw,
            log_var,
            delta,
            dec_in,
            dec_out,
        })
    }

    fn pass_loss(&self, x: &Matrix, pass: &Pass, kl_weight: f64) -> LossComponents {
        let b = x.rows() as f64;
        let recon = super::squared_distance(x.as_slice(), pass.x_hat().as_slice()) / b;
        let kl = match &pass.log_var {
            Some(lv) => super::kl_terms(pass.mu.as_slice(), lv.as_slice()) / b,
            None => 0.0,
        };
        LossComponents {
            total: recon + kl_weight * kl,
            recon,
            kl,
        }
    }

    /// Batch-mean loss without touching gradients.
    pub fn loss(
        &self,
        x: &Matrix,
        cond: Option<&Matrix>,
        delta: Option<&Matrix>,
        kl_weight: f64,
    ) -> Result<LossComponents> {
        let pass = self.forward(x, cond, delta)?;
        Ok(self.pass_loss(x, &pass, kl_weight))
    }

    /// Batch-mean loss; adds its gradient into every parameter's `grad`.
    pub fn loss_and_grad(
        &mut self,
        x: &Matrix,
        cond: Option<&Matrix>,
        delta: Option<&Matrix>,
        kl_weight: f64,
    ) -> Result<LossComponents> {
        let pass = self.forward(x, cond, delta)?;
        let loss = self.pass_loss(x, &pass, kl_weight);
        self.backward(x, &pass, kl_weight);
        Ok(loss)
    }

    fn backward(&mut self, x: &Matrix, pass: &Pass, kl_weight: f64) {
        let inv_b = 1.0 / x.rows() as f64;
        let act = self.spec.activation;

        // ∂recon/∂x̂ = 2(x̂ − x)/B
        let mut d = pass.x_hat().clone();
        for (g, xi) in d.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *g = 2.0 * (*g - xi) * inv_b;
        }
        let last = self.decoder.len() - 1;
        for i in (0..self.decoder.len()).rev() {
            if i != last {
                act.backprop_inplace(&pass.dec_out[i], &mut d);
            }
            let input = if i == 0 {
                &pass.dec_in
            } else {
                &pass.dec_out[i - 1]
            };
            d = self.decoder[i]
                .backward(input, &d, true)
                .expect("input gradient requested");
        }
        let latent = self.spec.latent_dim;
        let dz = if d.cols() == latent {
            d
        } else {
            d.columns(0, latent)
        };

        let h = pass.enc_out.last().unwrap_or(&pass.enc_in);
        let mut dh = match (&mut self.log_var_head, &pass.log_var, &pass.log_var_raw) {
            (Some(lv_head), Some(lv), Some(raw)) => {
                let mut dmu = dz.clone();
                let mut dlv = Matrix::zeros(dz.rows(), latent);
                let mu = pass.mu.as_slice();
                for k in 0..dz.as_slice().len() {
                    let l = lv.as_slice()[k];
                    let sigma = libm::exp(0.5 * l);
                    let g = dz.as_slice()[k];
                    // ∂z/∂μ = 1, ∂z/∂log σ² = ½ δ σ
                    let from_recon = match &pass.delta {
                        Some(delta) => g * 0.5 * delta.as_slice()[k] * sigma,
                        None => 0.0,
                    };
                    dmu.as_mut_slice()[k] += kl_weight * mu[k] * inv_b;
                    let from_kl = kl_weight * 0.5 * (libm::exp(l) - 1.0) * inv_b;
                    let r = raw.as_slice()[k];
                    dlv.as_mut_slice()[k] = if r.abs() > LOG_VAR_CLAMP {
                        0.0
                    } else {
                        from_recon + from_kl
                    };
                }
                let mut dh = self.mu_head.backward(h, &dmu, true).expect("requested");
                let dh_lv = lv_head.backward(h, &dlv, true).expect("requested");
                for (a, b) in dh.as_mut_slice().iter_mut().zip(dh_lv.as_slice()) {
                    *a += b;
                }
                dh
            }
            _ => self.mu_head.backward(h, &dz, true).expect("requested"),
        };

        for i in (0..self.encoder.len()).rev() {
            act.backprop_inplace(&pass.enc_out[i], &mut dh);
            let input = if i == 0 {
                &pass.enc_in
            } else {
                &pass.enc_out[i - 1]
            };
            match self.encoder[i].backward(input, &dh, i > 0) {
                Some(next) => dh = next,
                None => break,
            }
        }
    }

    fn draw_delta(&self, rows: usize, rng: &mut RngStream) -> Option<Matrix> {
        self.spec.kind.is_variational().then(|| {
            let mut d = Matrix::zeros(rows, self.spec.latent_dim);
            rng.fill_standard_normal(d.as_mut_slice());
            d
        })
    }

    /// One optimisation step on a batch with `δ` drawn from `rng`.
    pub fn train_step(
        &mut self,
        x: &Matrix,
        cond: Option<&Matrix>,
        rng: &mut RngStream,
        adam: &mut AdamConfig,
        kl_weight: f64,
    ) -> Result<LossComponents> {
        let delta = self.draw_delta(x.rows(), rng);
        self.train_step_with_delta(x, cond, delta.as_ref(), adam, kl_weight)
    }

    /// One optimisation step with a fixed `δ` (`None` decodes from `μ`).
    pub fn train_step_with_delta(
        &mut self,
        x: &Matrix,
        cond: Option<&Matrix>,
        delta: Option<&Matrix>,
        adam: &mut AdamConfig,
        kl_weight: f64,
    ) -> Result<LossComponents> {
        if x.rows() == 0 {
            return Err(Error::EmptyDataset("training batch"));
        }
        let loss = self.loss_and_grad(x, cond, delta, kl_weight)?;
        if !loss.total.is_finite() {
            self.zero_grads();
            return Err(Error::NonFinite {
                what: format!("training loss (recon {}, kl {})", loss.recon, loss.kl),
            });
        }
        adam.step_all(self.parameters_mut())?;
        Ok(loss)
    }

    /// Mini-batch training with a fresh shuffle from `rng` every epoch.
    /// `labels` are required for the CVAE and ignored otherwise.
    pub fn fit(
        &mut self,
        segments: &Matrix,
        labels: Option<&[usize]>,
        cfg: &FitConfig,
        rng: &mut RngStream,
        adam: &mut AdamConfig,
    ) -> Result<FitHistory> {
        let n = segments.rows();
        if n == 0 {
            return Err(Error::EmptyDataset("autoencoder training segments"));
        }
        if cfg.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be >= 1".into()));
        }
        let labels = match (self.spec.kind, labels) {
            (ModelKind::Cvae, None) => return Err(Error::ModelKind("cvae training needs labels".into())),
            (ModelKind::Cvae, Some(l)) => {
                if l.len() != n {
                    return Err(Error::Length {
                        op: "fit labels",
                        expected: n,
                        got: l.len(),
                    });
                }
                Some(l)
            }
            _ => None,
        };
        adam.validate()?;

        let mut order: Vec<usize> = (0..n).collect();
        let mut history = FitHistory::default();
        for epoch in 0..cfg.epochs {
            rng.shuffle(&mut order);
            let mut sum = LossComponents::default();
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let x = segments.select_rows(chunk);
                let cond = match labels {
                    Some(l) => {
                        let picked: Vec<usize> = chunk.iter().map(|&i| l[i]).collect();
                        Some(one_hot_matrix(&picked, self.spec.condition_dim)?)
                    }
                    None => None,
                };
                let loss = self
                    .train_step(&x, cond.as_ref(), rng, adam, cfg.kl_weight)
                    .map_err(|e| match e {
                        Error::NonFinite { what } => Error::NonFinite {
                            what: format!("{what} at epoch {} batch {b}", epoch + 1),
                        },
                        other => other,
                    })?;
                let w = chunk.len() as f64;
                sum.total += loss.total * w;
                sum.recon += loss.recon * w;
                sum.kl += loss.kl * w;
            }
            let mean = LossComponents {
                total: sum.total / n as f64,
                recon: sum.recon / n as f64,
                kl: sum.kl / n as f64,
            };
            history.epochs.push(mean);
            if cfg.recon_threshold.is_some_and(|t| mean.recon < t) {
                history.stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
        Ok(history)
    }

    /// Encoder outputs for a batch: `(μ, log σ²)`; the AE returns its code
    /// as `μ` and no variance.
    pub fn encode_batch(&self, x: &Matrix, cond: Option<&Matrix>) -> Result<(Matrix, Option<Matrix>)> {
        let (enc_in, enc_out) = self.encode_pass(x, cond)?;
        let (mu, _, lv) = self.heads(enc_out.last().unwrap_or(&enc_in))?;
        Ok((mu, lv))
    }

    pub fn decode_batch(&self, z: &Matrix, cond: Option<&Matrix>) -> Result<Matrix> {
        if z.cols() != self.spec.latent_dim {
            return Err(Error::Length {
                op: "decode",
                expected: self.spec.latent_dim,
                got: z.cols(),
            });
        }
        self.check_condition(z.rows(), cond)?;
        let dec_in = Self::with_condition(z, cond)?;
        let mut outs = self.decode_pass(&dec_in)?;
        Ok(outs.pop().expect("output layer"))
    }

    fn single_condition(&self, c: Option<&ConditionVector>) -> Result<Option<Matrix>> {
        c.map(|c| Matrix::row_vector(c.as_slice().to_vec())).transpose()
    }

    pub fn encode(&self, x: &[f64], c: Option<&ConditionVector>) -> Result<LatentParams> {
        let xm = Matrix::row_vector(x.to_vec())?;
        let cm = self.single_condition(c)?;
        let (mu, lv) = self.encode_batch(&xm, cm.as_ref())?;
        Ok(LatentParams {
            mu: mu.into_vec(),
            log_var: lv.map(Matrix::into_vec),
        })
    }

    pub fn decode(&self, z: &[f64], c: Option<&ConditionVector>) -> Result<Vec<f64>> {
        let zm = Matrix::row_vector(z.to_vec())?;
        let cm = self.single_condition(c)?;
        Ok(self.decode_batch(&zm, cm.as_ref())?.into_vec())
    }

    fn check_mode(&self, mode: FeatureMode) -> Result<()> {
        if self.spec.kind == ModelKind::Ae && mode != FeatureMode::Mu {
            return Err(Error::ModelKind(format!(
                "feature mode {mode:?} needs a variational model; the AE supports only Mu"
            )));
        }
        Ok(())
    }

    fn features_from(
        &self,
        mu: Matrix,
        lv: Option<Matrix>,
        mode: FeatureMode,
        rng: &mut RngStream,
    ) -> Result<Matrix> {
        match (mode, lv) {
            (FeatureMode::Mu, _) => Ok(mu),
            (FeatureMode::MuLogVar, Some(lv)) => mu.hcat(&lv),
            (FeatureMode::Sample, Some(lv)) => {
                let mut z = mu;
                for (zi, &l) in z.as_mut_slice().iter_mut().zip(lv.as_slice()) {
                    *zi += rng.standard_normal() * libm::exp(0.5 * l);
                }
                Ok(z)
            }
            (_, None) => Err(Error::ModelKind("mode needs a variance head".into())),
        }
    }

    /// Feature vectors for a batch of (standardized) segments, one row each.
    pub fn extract_batch(
        &self,
        x: &Matrix,
        cond: Conditioning<'_>,
        mode: FeatureMode,
        rng: &mut RngStream,
    ) -> Result<Matrix> {
        self.check_mode(mode)?;
        match cond {
            Conditioning::None => {
                let (mu, lv) = self.encode_batch(x, None)?;
                self.features_from(mu, lv, mode, rng)
            }
            Conditioning::Labels(labels) => {
                let c = one_hot_matrix(labels, self.spec.condition_dim)?;
                let (mu, lv) = self.encode_batch(x, Some(&c))?;
                self.features_from(mu, lv, mode, rng)
            }
            Conditioning::Marginal => {
                if self.spec.kind != ModelKind::Cvae {
                    return Err(Error::ModelKind(
                        "marginal conditioning applies to the cvae only".into(),
                    ));
                }
                let n = self.spec.condition_dim;
                let mut acc: Option<Matrix> = None;
                for class in 0..n {
                    let labels = vec![class; x.rows()];
                    let c = one_hot_matrix(&labels, n)?;
                    let (mu, lv) = self.encode_batch(x, Some(&c))?;
                    let f = self.features_from(mu, lv, mode, rng)?;
                    match &mut acc {
                        None => acc = Some(f),
                        Some(a) => {
                            for (s, v) in a.as_mut_slice().iter_mut().zip(f.as_slice()) {
                                *s += v;
                            }
                        }
                    }
                }
                let mut a = acc.expect("at least one class");
                for v in a.as_mut_slice() {
                    *v /= n as f64;
                }
                Ok(a)
            }
        }
    }

    /// Feature vector for one segment.
    pub fn extract_features(
        &self,
        segment: &LogMelSegment,
        c: Option<&ConditionVector>,
        mode: FeatureMode,
        rng: &mut RngStream,
    ) -> Result<LatentFeatures> {
        self.check_mode(mode)?;
        let lp = self.encode(&segment.values, c)?;
        let xm = Matrix::row_vector(lp.mu)?;
        let lv = lp.log_var.map(Matrix::row_vector).transpose()?;
        let values = self.features_from(xm, lv, mode, rng)?.into_vec();
        Ok(LatentFeatures {
            utterance_id: segment.utterance_id.clone(),
            segment_index: segment.segment_index,
            values,
        })
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }
}

impl ParameterSet for Autoencoder {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for l in self
            .encoder
            .iter()
            .chain(core::iter::once(&self.mu_head))
            .chain(self.log_var_head.iter())
            .chain(self.decoder.iter())
        {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for l in self
            .encoder
            .iter_mut()
            .chain(core::iter::once(&mut self.mu_head))
            .chain(self.log_var_head.iter_mut())
            .chain(self.decoder.iter_mut())
        {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }
}
