//! Two-layer LSTM sequence classifier over per-segment latent features.

mod lstm;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use lstm::{lstm_cell, LstmLayerParams};

use crate::layers::Dense;
use crate::numeric::{softmax, AdamConfig, Matrix, Parameter, ParameterSet, RngStream};
use crate::{Error, Result};

/// How the utterance representation is read off the top LSTM layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Readout {
    /// Hidden state after the last real step.
    #[default]
    Final,
    /// Mean of hidden states over the real steps.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassifierSpec {
    pub input_dim: usize,
    pub lstm_hidden: [usize; 2],
    pub n_classes: usize,
    pub readout: Readout,
}

impl ClassifierSpec {
    pub fn standard(input_dim: usize, n_classes: usize) -> Self {
        ClassifierSpec {
            input_dim,
            lstm_hidden: [128, 128],
            n_classes,
            readout: Readout::Final,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.lstm_hidden.contains(&0) {
            return Err(Error::Validation("classifier dimensions must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Validation("classifier needs at least two classes".into()));
        }
        Ok(())
    }
}

/// One utterance: a `T × D` feature sequence and its class.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub utterance_id: String,
    pub features: Matrix,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 20,
            patience: 3,
            batch_size: 8,
            adam: AdamConfig::conventional(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

struct BatchTrace {
    xs: Vec<Matrix>,
    lens: Vec<usize>,
    traces: Vec<lstm::LayerTrace>,
    pooled: Matrix,
    probs: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier {
    spec: ClassifierSpec,
    layers: Vec<LstmLayerParams>,
    output: Dense,
}

impl LstmClassifier {
    pub fn new(spec: ClassifierSpec, rng: &RngStream) -> Result<Self> {
        spec.validate()?;
        let l0 = LstmLayerParams::new("lstm.0", spec.input_dim, spec.lstm_hidden[0], rng);
        let l1 = LstmLayerParams::new("lstm.1", spec.lstm_hidden[0], spec.lstm_hidden[1], rng);
        let output = Dense::glorot(
            "output",
            spec.lstm_hidden[1],
            spec.n_classes,
            &mut rng.fork_named("output"),
        );
        Ok(LstmClassifier {
            spec,
            layers: vec![l0, l1],
            output,
        })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn layer(&self, i: usize) -> &LstmLayerParams {
        &self.layers[i]
    }

    fn forward_batch(&self, batch: &[&SequenceExample]) -> Result<BatchTrace> {
        if batch.is_empty() {
            return Err(Error::EmptyRequest {
                op: "classifier forward",
            });
        }
        let d = self.spec.input_dim;
        let lens: Vec<usize> = batch.iter().map(|e| e.features.rows()).collect();
        for e in batch {
            if e.features.rows() == 0 {
                return Err(Error::Validation(alloc::format!(
                    "utterance {} has no segments",
                    e.utterance_id
                )));
            }
            if e.features.cols() != d {
                return Err(Error::dim(
                    "classifier input",
                    e.features.shape(),
                    (e.features.rows(), d),
                ));
            }
        }
        let steps = lens.iter().copied().max().unwrap_or(0);
        let xs: Vec<Matrix> = (0..steps)
            .map(|t| {
                let mut x = Matrix::zeros(batch.len(), d);
                for (r, e) in batch.iter().enumerate() {
                    if t < e.features.rows() {
                        x.row_mut(r).copy_from_slice(e.features.row(t));
                    }
                }
                x
            })
            .collect();
        let t0 = self.layers[0].forward(&xs, &lens)?;
        let t1 = self.layers[1].forward(&t0.h, &lens)?;
        let pooled = match self.spec.readout {
            Readout::Final => t1.h[steps - 1].clone(),
            Readout::Mean => {
                let mut p = Matrix::zeros(batch.len(), self.spec.lstm_hidden[1]);
                for (r, &len) in lens.iter().enumerate() {
                    let row = p.row_mut(r);
                    for h in &t1.h[..len] {
                        for (a, v) in row.iter_mut().zip(h.row(r)) {
                            *a += v;
                        }
                    }
                    for a in row.iter_mut() {
                        *a /= len as f64;
                    }
                }
                p
            }
        };
        let logits = self.output.forward(&pooled)?;
        let mut probs = Matrix::zeros(batch.len(), self.spec.n_classes);
        for r in 0..batch.len() {
            probs.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
        }
        Ok(BatchTrace {
            xs,
            lens,
            traces: vec![t0, t1],
            pooled,
            probs,
        })
    }

    /// Class probabilities for each sequence, in input order.
    pub fn predict_proba(&self, batch: &[&SequenceExample]) -> Result<Vec<Vec<f64>>> {
        let tr = self.forward_batch(batch)?;
        Ok((0..batch.len()).map(|r| tr.probs.row(r).to_vec()).collect())
    }

    pub fn predict(&self, example: &SequenceExample) -> Result<usize> {
        Ok(argmax(&self.predict_proba(&[example])?[0]))
    }

    fn losses_from(&self, tr: &BatchTrace, batch: &[&SequenceExample]) -> Result<Vec<f64>> {
        batch
            .iter()
            .enumerate()
            .map(|(r, e)| {
                if e.label >= self.spec.n_classes {
                    return Err(Error::Validation(alloc::format!(
                        "label {} out of range for {} classes",
                        e.label,
                        self.spec.n_classes
                    )));
                }
                Ok(-libm::log(tr.probs.get(r, e.label).max(f64::MIN_POSITIVE)))
            })
            .collect()
    }

    /// Per-sequence cross-entropy `−ln p(label)`.
    pub fn sequence_losses(&self, batch: &[&SequenceExample]) -> Result<Vec<f64>> {
        let tr = self.forward_batch(batch)?;
        self.losses_from(&tr, batch)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &[&SequenceExample]) -> Result<f64> {
        let l = self.sequence_losses(batch)?;
        Ok(l.iter().sum::<f64>() / l.len() as f64)
    }

    /// Mean cross-entropy; accumulates its gradient into every parameter.
    pub fn loss_and_grad(&mut self, batch: &[&SequenceExample]) -> Result<f64> {
        let tr = self.forward_batch(batch)?;
        let losses = self.losses_from(&tr, batch)?;
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let n = batch.len();
        let mut dlogits = tr.probs.clone();
        for (r, e) in batch.iter().enumerate() {
            let v = dlogits.get(r, e.label);
            dlogits.set(r, e.label, v - 1.0);
        }
        for v in dlogits.as_mut_slice() {
            *v /= n as f64;
        }
        let dpooled = self
            .output
            .backward(&tr.pooled, &dlogits, true)
            .expect("input grad requested");
        let steps = tr.xs.len();
        let h1 = self.spec.lstm_hidden[1];
        let mut dh = vec![Matrix::zeros(n, h1); steps];
        match self.spec.readout {
            Readout::Final => dh[steps - 1] = dpooled,
            Readout::Mean => {
                for (r, &len) in tr.lens.iter().enumerate() {
                    for d in dh.iter_mut().take(len) {
                        for (a, v) in d.row_mut(r).iter_mut().zip(dpooled.row(r)) {
                            *a = v / len as f64;
                        }
                    }
                }
            }
        }
        let (lower, upper) = self.layers.split_at_mut(1);
        let dh0 = upper[0].backward(&tr.traces[0].h, &tr.lens, &tr.traces[1], &dh, true);
        lower[0].backward(&tr.xs, &tr.lens, &tr.traces[0], &dh0, false);
        Ok(loss)
    }

    /// Minibatch training with early stopping on validation loss. The
    /// weights of the best validation epoch are restored at the end.
    pub fn fit(
        &mut self,
        train: &[SequenceExample],
        val: &[SequenceExample],
        cfg: &TrainConfig,
        rng: &mut RngStream,
    ) -> Result<TrainHistory> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("classifier training set"));
        }
        if cfg.batch_size == 0 || cfg.max_epochs == 0 {
            return Err(Error::Validation(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        let mut adam = cfg.adam;
        adam.validate()?;
        let mut history = TrainHistory::default();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut since_best = 0;
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..cfg.max_epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&SequenceExample> = chunk.iter().map(|&i| &train[i]).collect();
                let l = self.loss_and_grad(&batch)?;
                adam.step_all(self.parameters_mut())?;
                total += l * chunk.len() as f64;
            }
            let train_loss = total / train.len() as f64;
            if !train_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: alloc::format!("classifier loss at epoch {}", epoch + 1),
                });
            }
            history.train_loss.push(train_loss);
            let monitored = if val.is_empty() {
                train_loss
            } else {
                let refs: Vec<&SequenceExample> = val.iter().collect();
                let v = self.loss(&refs)?;
                history.val_loss.push(v);
                v
            };
            if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
                best = Some((monitored, self.flat_values()));
                history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
        if let Some((_, values)) = best {
            self.load_flat_values(&values)?;
        }
        Ok(history)
    }
}

impl ParameterSet for LstmClassifier {
    fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend([&l.w, &l.u, &l.b]);
        }
        out.extend([&self.output.weight, &self.output.bias]);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend([&mut l.w, &mut l.u, &mut l.b]);
        }
        out.extend([&mut self.output.weight, &mut self.output.bias]);
        out
    }
}
