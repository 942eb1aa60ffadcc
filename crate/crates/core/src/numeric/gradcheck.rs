use alloc::vec::Vec;

use crate::{Error, Result};

/// Central-difference gradient of `loss` at `x`:
/// `(f(x + eps·eᵢ) − f(x − eps·eᵢ)) / (2·eps)` per coordinate.
pub fn finite_difference_gradient<F>(loss: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    probe_coordinates(loss, x, eps, &[(1.0, 0.5)])
}

/// Fourth-order central difference,
/// `(8·(f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))) / (12·h)`.
/// Truncation error is O(h⁴), so a larger `h` keeps round-off small.
pub fn finite_difference_gradient_o4<F>(loss: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    probe_coordinates(loss, x, eps, &[(1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)])
}

/// `Σ w·(f(x + k·h·eᵢ) − f(x − k·h·eᵢ)) / h` over the `(k, w)` taps.
fn probe_coordinates<F>(mut loss: F, x: &[f64], eps: f64, taps: &[(f64, f64)]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(alloc::format!("eps must be > 0, got {eps}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        let mut acc = 0.0;
        for &(k, w) in taps {
            probe[i] = orig + k * eps;
            let plus = loss(&probe);
            probe[i] = orig - k * eps;
            let minus = loss(&probe);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    what: alloc::format!("loss while probing coordinate {i}"),
                });
            }
            acc += w * (plus - minus);
        }
        probe[i] = orig;
        grad.push(acc / eps);
    }
    Ok(grad)
}

/// Denominator floor for [`relative_error`]: below this, two gradients are
/// compared on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a| + |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(RELATIVE_ERROR_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_is_exact_on_quartics() {
        let f = |x: &[f64]| x[0].powi(4) - 2.0 * x[0].powi(3);
        let g = finite_difference_gradient_o4(f, &[1.5], 1e-2).unwrap();
        // d/dx = 4x³ − 6x² = 0 at 1.5.
        assert!(g[0].abs() < 1e-10, "{}", g[0]);
        let g2 = finite_difference_gradient(f, &[1.5], 1e-2).unwrap();
        assert!(g2[0].abs() > 1e-5);
    }

    #[test]
    fn square_at_three() {
        let g = finite_difference_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8, "{}", g[0]);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_difference_gradient(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_has_unit_gradient() {
        let g = finite_difference_gradient(|x| x.iter().sum(), &[0.5, 1.5, -7.0, 2.0], 1e-5).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_probe_is_reported() {
        let r = finite_difference_gradient(|x| 1.0 / x[0], &[0.0], 1e-5);
        assert!(r.is_ok());
        let r = finite_difference_gradient(|x| libm::log(x[0]), &[0.0], 1e-5);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn relative_error_properties() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.0, 3.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(0.0, 1e-12) < 1e-5);
    }
}
