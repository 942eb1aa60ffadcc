//! Dense f64 matrices, deterministic sampling, Adam and the finite-difference
//! gradient oracle.

mod adam;
mod gradcheck;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamConfig, Parameter, ParameterSet};
pub use gradcheck::{
    finite_difference_gradient, finite_difference_gradient_o4, max_relative_error, relative_error,
};
pub use matrix::Matrix;
pub(crate) use matrix::{gemm_nn, gemm_tn_acc};
pub use rng::RngStream;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Softmax over a slice, shifted by the maximum for stability.
pub fn softmax(logits: &[f64]) -> alloc::vec::Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: alloc::vec::Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}
