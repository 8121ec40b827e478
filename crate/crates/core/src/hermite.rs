//! Normalized Hermite functions and Gauss-Hermite quadrature.
//!
//! The Hermite function `h_n(ξ) = (2^n n! √π)^{-1/2} H_n(ξ) e^{-ξ²/2}` is the
//! 1D oscillator eigenfunction in units of the oscillator length. It is
//! evaluated by the normalized three-term recurrence, which stays finite at
//! orders where `H_n` and `n!` individually overflow.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// `π^{-1/4}`
pub const PI_POW_M14: f64 = 0.751_125_544_464_942_5;

/// Value of the normalized Hermite function `h_n` at `xi`.
pub fn hermite_function(n: u32, xi: f64) -> f64 {
    let h0 = PI_POW_M14 * (-0.5 * xi * xi).exp();
    if n == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = std::f64::consts::SQRT_2 * xi * h0;
    for k in 1..n {
        let k = k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * xi * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[0..=n_max]` with `h_0(xi) ..= h_{n_max}(xi)`.
pub fn hermite_functions_into(xi: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI_POW_M14 * (-0.5 * xi * xi).exp();
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * xi * out[0];
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// All Hermite functions up to `n_max` at one point.
pub fn hermite_functions(n_max: u32, xi: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max as usize + 1];
    hermite_functions_into(xi, &mut out);
    out
}

/// Gauss-Hermite nodes and weights for `∫ f(x) e^{-x²} dx`, computed with
/// the Golub-Welsch eigenvalue method. Nodes are returned in ascending order.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = off;
        jacobi[(k - 1, k)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    // explicit physicists' Hermite polynomials for small n
    fn h_explicit(n: u32, x: f64) -> f64 {
        let poly = match n {
            0 => 1.0,
            1 => 2.0 * x,
            2 => 4.0 * x * x - 2.0,
            3 => 8.0 * x.powi(3) - 12.0 * x,
            4 => 16.0 * x.powi(4) - 48.0 * x * x + 12.0,
            _ => unreachable!(),
        };
        let fact = (1..=n).product::<u32>() as f64;
        poly * (-0.5 * x * x).exp() / (2f64.powi(n as i32) * fact * PI.sqrt()).sqrt()
    }

    #[test]
    fn ground_state_peak() {
        assert!((hermite_function(0, 0.0) - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(hermite_function(1, 0.0), 0.0);
    }

    #[test]
    fn recurrence_matches_explicit_polynomials() {
        for n in 0..=4 {
            for &x in &[-2.3, -0.7, 0.0, 0.4, 1.9, 3.1] {
                let a = hermite_function(n, x);
                let b = h_explicit(n, x);
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn vector_and_scalar_agree() {
        let all = hermite_functions(12, 1.37);
        for (n, v) in all.iter().enumerate() {
            assert!((v - hermite_function(n as u32, 1.37)).abs() < 1e-15);
        }
    }

    #[test]
    fn gauss_hermite_integrates_polynomials() {
        let (x, w) = gauss_hermite(20);
        let total: f64 = w.iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-13);
        // ∫ x^4 e^{-x²} = 3√π/4
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn high_order_stays_finite() {
        for n in [50, 100, 200] {
            let v = hermite_function(n, 3.0);
            assert!(v.is_finite() && v.abs() < 1.0);
        }
    }
}
