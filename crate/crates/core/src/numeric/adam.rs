use alloc::string::String;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub m: Matrix,
    pub v: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
        }
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Resets both moment estimates, keeping the value.
    pub fn reset_moments(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
    }
}

/// Adam hyper-parameters plus the shared step counter.
///
/// [`AdamConfig::default`] uses β1 = 0.999, β2 = 0.99, ε = 1e-8 and a
/// learning rate of 1e-3, the values reported for the autoencoders. Note that
/// this swaps the usual ordering (β1 = 0.9, β2 = 0.999, see
/// [`AdamConfig::conventional`]); both betas are plain fields.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub step_count: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.999,
            beta2: 0.99,
            epsilon: 1e-8,
            learning_rate: 1e-3,
            step_count: 0,
        }
    }
}

impl AdamConfig {
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8, lr = 1e-3.
    pub fn conventional() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(alloc::format!(
                "adam requires 0<beta1<1, 0<beta2<1, epsilon>0, lr>0; got {self:?}"
            )))
        }
    }

    /// Applies one update to every parameter using a single shared step
    /// index, then advances the counter. Gradients are zeroed afterwards.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step_all<'a, I>(&mut self, params: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a mut Parameter>,
    {
        let params: Vec<&mut Parameter> = params.into_iter().collect();
        for p in &params {
            check_grad(p)?;
        }
        let t = self.step_count + 1;
        for p in params {
            self.apply(p, t);
        }
        self.step_count = t;
        Ok(())
    }

    fn apply(&self, p: &mut Parameter, t: u64) {
        let (b1, b2) = (self.beta1, self.beta2);
        let t = t as f64;
        let c1 = 1.0 - libm::pow(b1, t);
        let c2 = 1.0 - libm::pow(b2, t);
        let Parameter {
            value, grad, m, v, ..
        } = p;
        let iter = value
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_mut_slice().iter_mut())
            .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()));
        for ((theta, g), (mi, vi)) in iter {
            *mi = b1 * *mi + (1.0 - b1) * *g;
            *vi = b2 * *vi + (1.0 - b2) * *g * *g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *theta -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
            *g = 0.0;
        }
    }
}

fn check_grad(p: &Parameter) -> Result<()> {
    if p.grad.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: alloc::format!("gradient of parameter {:?}", p.name),
        })
    }
}

/// One Adam update of a single parameter at step `cfg.step_count + 1`.
/// Models with several parameters use [`AdamConfig::step_all`] so they share
/// one step index.
pub fn adam_step(param: &mut Parameter, cfg: &mut AdamConfig) -> Result<()> {
    cfg.step_all(core::iter::once(param))
}

/// Anything that owns trainable parameters in a fixed order.
pub trait ParameterSet {
    fn parameters(&self) -> Vec<&Parameter>;
    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// All values concatenated in parameter order.
    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for p in self.parameters() {
            out.extend_from_slice(p.value.as_slice());
        }
        out
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for p in self.parameters() {
            out.extend_from_slice(p.grad.as_slice());
        }
        out
    }

    /// Overwrites all values from a flat vector produced by
    /// [`ParameterSet::flat_values`].
    fn load_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.parameter_count();
        if flat.len() != expected {
            return Err(Error::Length {
                op: "load_flat_values",
                expected,
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.len();
            p.value.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
