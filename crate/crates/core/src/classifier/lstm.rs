use alloc::format;
use alloc::vec::Vec;

use crate::layers::Dense;
use crate::numeric::{gemm_nn, gemm_tn_acc, sigmoid, Matrix, Parameter, RngStream};
use crate::{Error, Result};

/// One LSTM layer. The four gates are stacked row-wise in the order
/// input, forget, cell candidate, output: `W` is `4H × input`, `U` is
/// `4H × H` and `b` is `1 × 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w: Parameter,
    pub u: Parameter,
    pub b: Parameter,
    pub hidden_size: usize,
}

/// Cached activations of one layer over a padded batch.
pub(crate) struct LayerTrace {
    /// Post-activation gates `[i | f | g | o]`, one `B × 4H` matrix per step.
    gates: Vec<Matrix>,
    /// Cell state after each step.
    pub(crate) c: Vec<Matrix>,
    tanh_c: Vec<Matrix>,
    /// Hidden state after each step (carried through padding).
    pub(crate) h: Vec<Matrix>,
}

impl LstmLayerParams {
    /// Glorot-uniform `W` and `U`, zero bias except the forget gate at 1.0.
    pub fn new(name: &str, input_dim: usize, hidden: usize, rng: &RngStream) -> Self {
        let w = Dense::glorot(
            &format!("{name}.w"),
            input_dim,
            4 * hidden,
            &mut rng.fork_named(&format!("{name}.w")),
        );
        let u = Dense::glorot(
            &format!("{name}.u"),
            hidden,
            4 * hidden,
            &mut rng.fork_named(&format!("{name}.u")),
        );
        let mut b = Matrix::zeros(1, 4 * hidden);
        for v in &mut b.as_mut_slice()[hidden..2 * hidden] {
            *v = 1.0;
        }
        LstmLayerParams {
            w: Parameter::new(format!("{name}.w"), w.weight.value),
            u: Parameter::new(format!("{name}.u"), u.weight.value),
            b: Parameter::new(format!("{name}.b"), b),
            hidden_size: hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.cols()
    }

    /// Runs the layer over `xs` (one `B × input` matrix per step). Row `r` is
    /// live at step `t` iff `t < lens[r]`; elsewhere `h` and `c` are carried
    /// unchanged, so the last state equals the state at each row's true end.
    pub(crate) fn forward(&self, xs: &[Matrix], lens: &[usize]) -> Result<LayerTrace> {
        let hsz = self.hidden_size;
        let batch = lens.len();
        let wt = self.w.value.transpose();
        let ut = self.u.value.transpose();
        let bias = self.b.value.as_slice();
        let mut trace = LayerTrace {
            gates: Vec::with_capacity(xs.len()),
            c: Vec::with_capacity(xs.len()),
            tanh_c: Vec::with_capacity(xs.len()),
            h: Vec::with_capacity(xs.len()),
        };
        let zero = Matrix::zeros(batch, hsz);
        for (t, x) in xs.iter().enumerate() {
            if x.shape() != (batch, self.input_dim()) {
                return Err(Error::dim("lstm input", x.shape(), (batch, self.input_dim())));
            }
            let h_prev = trace.h.last().unwrap_or(&zero);
            let c_prev = trace.c.last().unwrap_or(&zero);
            let mut pre = Matrix::zeros(batch, 4 * hsz);
            gemm_nn(x, &wt, &mut pre);
            let mut rec = Matrix::zeros(batch, 4 * hsz);
            gemm_nn(h_prev, &ut, &mut rec);
            let mut c = Matrix::zeros(batch, hsz);
            let mut tc = Matrix::zeros(batch, hsz);
            let mut h = Matrix::zeros(batch, hsz);
            for r in 0..batch {
                let g = pre.row_mut(r);
                for ((gv, rv), bv) in g.iter_mut().zip(rec.row(r)).zip(bias) {
                    *gv += rv + bv;
                }
                for v in &mut g[..2 * hsz] {
                    *v = sigmoid(*v);
                }
                for v in &mut g[2 * hsz..3 * hsz] {
                    *v = libm::tanh(*v);
                }
                for v in &mut g[3 * hsz..] {
                    *v = sigmoid(*v);
                }
                if t < lens[r] {
                    for k in 0..hsz {
                        let cv = g[hsz + k] * c_prev.get(r, k) + g[k] * g[2 * hsz + k];
                        let th = libm::tanh(cv);
                        c.set(r, k, cv);
                        tc.set(r, k, th);
                        h.set(r, k, g[3 * hsz + k] * th);
                    }
                } else {
                    c.row_mut(r).copy_from_slice(c_prev.row(r));
                    h.row_mut(r).copy_from_slice(h_prev.row(r));
                }
            }
            trace.gates.push(pre);
            trace.c.push(c);
            trace.tanh_c.push(tc);
            trace.h.push(h);
        }
        Ok(trace)
    }

    /// BPTT. `dh_ext[t]` is the loss gradient arriving at `h_t` from above.
    /// Accumulates parameter gradients and returns `∂L/∂x_t` when asked.
    pub(crate) fn backward(
        &mut self,
        xs: &[Matrix],
        lens: &[usize],
        trace: &LayerTrace,
        dh_ext: &[Matrix],
        want_input_grad: bool,
    ) -> Vec<Matrix> {
        let hsz = self.hidden_size;
        let batch = lens.len();
        let steps = xs.len();
        let zero = Matrix::zeros(batch, hsz);
        let mut dh_next = Matrix::zeros(batch, hsz);
        let mut dc_next = Matrix::zeros(batch, hsz);
        let mut dxs = Vec::new();
        if want_input_grad {
            dxs.resize(steps, Matrix::zeros(0, 0));
        }
        for t in (0..steps).rev() {
            let gates = &trace.gates[t];
            let c_prev = if t == 0 { &zero } else { &trace.c[t - 1] };
            let h_prev = if t == 0 { &zero } else { &trace.h[t - 1] };
            let mut dpre = Matrix::zeros(batch, 4 * hsz);
            let mut dh_carry = Matrix::zeros(batch, hsz);
            let mut dc_prev = Matrix::zeros(batch, hsz);
            for r in 0..batch {
                let g = gates.row(r);
                let dp = dpre.row_mut(r);
                if t < lens[r] {
                    for k in 0..hsz {
                        let dh = dh_ext[t].get(r, k) + dh_next.get(r, k);
                        let (i, f, cg, o) = (g[k], g[hsz + k], g[2 * hsz + k], g[3 * hsz + k]);
                        let th = trace.tanh_c[t].get(r, k);
                        let d_o = dh * th;
                        let dc = dc_next.get(r, k) + dh * o * (1.0 - th * th);
                        dp[k] = dc * cg * i * (1.0 - i);
                        dp[hsz + k] = dc * c_prev.get(r, k) * f * (1.0 - f);
                        dp[2 * hsz + k] = dc * i * (1.0 - cg * cg);
                        dp[3 * hsz + k] = d_o * o * (1.0 - o);
                        dc_prev.set(r, k, dc * f);
                    }
                } else {
                    for k in 0..hsz {
                        dh_carry.set(r, k, dh_ext[t].get(r, k) + dh_next.get(r, k));
                        dc_prev.set(r, k, dc_next.get(r, k));
                    }
                }
            }
            gemm_tn_acc(&dpre, &xs[t], &mut self.w.grad);
            gemm_tn_acc(&dpre, h_prev, &mut self.u.grad);
            let db = self.b.grad.as_mut_slice();
            for r in 0..batch {
                for (a, v) in db.iter_mut().zip(dpre.row(r)) {
                    *a += v;
                }
            }
            let mut dh_prev = Matrix::zeros(batch, hsz);
            gemm_nn(&dpre, &self.u.value, &mut dh_prev);
            for (a, v) in dh_prev.as_mut_slice().iter_mut().zip(dh_carry.as_slice()) {
                *a += v;
            }
            if want_input_grad {
                let mut dx = Matrix::zeros(batch, self.input_dim());
                gemm_nn(&dpre, &self.w.value, &mut dx);
                dxs[t] = dx;
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }
}

/// Single step of the cell on one example:
/// `i=σ(Wᵢx+Uᵢh+bᵢ)`, `f=σ(…)`, `g=tanh(…)`, `o=σ(…)`,
/// `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmLayerParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hsz = params.hidden_size;
    if x.len() != params.input_dim() {
        return Err(Error::Length {
            op: "lstm_cell input",
            expected: params.input_dim(),
            got: x.len(),
        });
    }
    if h_prev.len() != hsz || c_prev.len() != hsz {
        return Err(Error::Length {
            op: "lstm_cell state",
            expected: hsz,
            got: h_prev.len().min(c_prev.len()),
        });
    }
    let w = &params.w.value;
    let u = &params.u.value;
    let b = params.b.value.as_slice();
    let pre = |j: usize| -> f64 {
        let wx: f64 = w.row(j).iter().zip(x).map(|(a, v)| a * v).sum();
        let uh: f64 = u.row(j).iter().zip(h_prev).map(|(a, v)| a * v).sum();
        wx + uh + b[j]
    };
    let mut h = Vec::with_capacity(hsz);
    let mut c = Vec::with_capacity(hsz);
    for k in 0..hsz {
        let i = sigmoid(pre(k));
        let f = sigmoid(pre(hsz + k));
        let g = libm::tanh(pre(2 * hsz + k));
        let o = sigmoid(pre(3 * hsz + k));
        let cv = f * c_prev[k] + i * g;
        c.push(cv);
        h.push(o * libm::tanh(cv));
    }
    Ok((h, c))
}
