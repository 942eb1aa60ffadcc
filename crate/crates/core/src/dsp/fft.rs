use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Radix-2 decimation-in-time FFT plan with precomputed twiddles.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parameter(alloc::format!(
                "fft size must be a power of two >= 2, got {n}"
            )));
        }
        let half = n / 2;
        let step = -2.0 * core::f64::consts::PI / n as f64;
        let cos = (0..half).map(|k| libm::cos(step * k as f64)).collect();
        let sin = (0..half).map(|k| libm::sin(step * k as f64)).collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        Ok(FftPlan { n, cos, sin, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place forward transform `X[k] = Σ x[n]·e^{−2πikn/N}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        debug_assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * stride], self.sin[k * stride]);
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
    }

    /// `|X[k]|²` for `k = 0..=N/2` of a real frame zero-padded to `N`.
    pub fn power(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() > self.n {
            return Err(Error::Parameter(alloc::format!(
                "n_fft {} shorter than frame length {}",
                self.n,
                frame.len()
            )));
        }
        let mut re = vec![0.0; self.n];
        re[..frame.len()].copy_from_slice(frame);
        let mut im = vec![0.0; self.n];
        self.forward(&mut re, &mut im);
        Ok((0..=self.n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * core::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * libm::cos(a);
                    im += v * libm::sin(a);
                }
                (re, im)
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = crate::numeric::RngStream::new(1);
        for n in [2usize, 8, 64] {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let plan = FftPlan::new(n).unwrap();
            let mut re = x.clone();
            let mut im = vec![0.0; n];
            plan.forward(&mut re, &mut im);
            for (k, (r, i)) in naive_dft(&x).into_iter().enumerate() {
                assert!((re[k] - r).abs() < 1e-10 && (im[k] - i).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FftPlan::new(400).is_err());
        assert!(FftPlan::new(1).is_err());
    }
}
