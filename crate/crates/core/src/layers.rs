//! Fully connected layer and pointwise activations shared by the
//! autoencoders and the classifier head.

use alloc::format;

use crate::numeric::{gemm_nn, gemm_tn_acc, Matrix, Parameter, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Sigmoid => crate::numeric::sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn apply_inplace(self, m: &mut Matrix) {
        if self != Activation::Identity {
            for v in m.as_mut_slice() {
                *v = self.apply(*v);
            }
        }
    }

    /// `grad ⊙= f'(·)` given the layer output.
    pub fn backprop_inplace(self, output: &Matrix, grad: &mut Matrix) {
        if self != Activation::Identity {
            for (g, &y) in grad.as_mut_slice().iter_mut().zip(output.as_slice()) {
                *g *= self.derivative_from_output(y);
            }
        }
    }
}

/// `y = x·Wᵀ + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    /// Glorot-uniform weights in ±√(6/(fan_in+fan_out)), zero bias.
    pub fn glorot(name: &str, input: usize, output: usize, rng: &mut RngStream) -> Self {
        let limit = libm::sqrt(6.0 / (input + output) as f64);
        let data = (0..input * output).map(|_| rng.uniform(-limit, limit)).collect();
        let weight = Matrix::from_vec(output, input, data).expect("finite init");
        Dense {
            weight: Parameter::new(format!("{name}.weight"), weight),
            bias: Parameter::new(format!("{name}.bias"), Matrix::zeros(1, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("dense forward", x.shape(), self.weight.value.shape()));
        }
        let mut y = Matrix::zeros(x.rows(), self.output_dim());
        gemm_nn(x, &self.weight.value.transpose(), &mut y);
        let b = self.bias.value.as_slice();
        for r in 0..y.rows() {
            for (v, bi) in y.row_mut(r).iter_mut().zip(b) {
                *v += bi;
            }
        }
        Ok(y)
    }

    /// Accumulates `∂L/∂W` and `∂L/∂b` from the upstream gradient `dy` and
    /// returns `∂L/∂x` when `want_input_grad` is set.
    pub fn backward(&mut self, x: &Matrix, dy: &Matrix, want_input_grad: bool) -> Option<Matrix> {
        debug_assert_eq!(dy.cols(), self.output_dim());
        gemm_tn_acc(dy, x, &mut self.weight.grad);
        let db = self.bias.grad.as_mut_slice();
        for r in 0..dy.rows() {
            for (g, d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        want_input_grad.then(|| {
            let mut dx = Matrix::zeros(dy.rows(), self.input_dim());
            gemm_nn(dy, &self.weight.value, &mut dx);
            dx
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_difference_gradient;

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = RngStream::new(1);
        let d = Dense::glorot("l", 30, 20, &mut rng);
        let lim = (6.0f64 / 50.0).sqrt();
        assert!(d.weight.value.as_slice().iter().all(|w| w.abs() <= lim));
        assert!(d.bias.value.as_slice().iter().all(|&b| b == 0.0));
        assert_eq!(d.weight.value.shape(), (20, 30));
    }

    #[test]
    fn dense_input_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let mut d = Dense::glorot("l", 3, 2, &mut rng);
        let x = Matrix::from_rows(&[[0.3, -0.2, 0.9]]).unwrap();
        // L = Σ y²/2 ⇒ dy = y
        let y = d.forward(&x).unwrap();
        let dx = d.backward(&x, &y, true).unwrap();
        let numeric = finite_difference_gradient(
            |v| {
                let xm = Matrix::from_vec(1, 3, v.to_vec()).unwrap();
                d.forward(&xm)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .map(|t| 0.5 * t * t)
                    .sum()
            },
            x.as_slice(),
            1e-6,
        )
        .unwrap();
        for (a, n) in dx.as_slice().iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8);
        }
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Identity] {
            let x = 0.37;
            let h = 1e-6;
            let num = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
            let ana = act.derivative_from_output(act.apply(x));
            assert!((num - ana).abs() < 1e-8, "{act:?}");
        }
    }
}
