mod common;

use common::poisson;
use proptest::prelude::*;
use qjump_core::hermite::{gauss_hermite, hermite_function};
use qjump_core::model::{pair_density, plane_wave_form_factor, poisson_weight, transition_frequency, MultiIndex};

#[test]
fn hermite_functions_are_orthonormal() {
    let (nodes, weights) = gauss_hermite(40);
    for a in 0..10 {
        for b in 0..10 {
            // φ_a φ_b = H_a H_b e^{-x²} / norms: integrate with the weight removed
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * (x * x).exp() * hermite_function(a, x) * hermite_function(b, x))
                .sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((s - expect).abs() < 1e-12, "({a},{b}) = {s}");
        }
    }
}

#[test]
fn form_factor_is_unitary() {
    for q in [0.1, 1.0, 3.0] {
        let eta = q * q / 2.0;
        let mut total = 0.0;
        let mut n = 0;
        // stop once the Poisson tail beyond n is below 1e-10
        loop {
            total += poisson_weight(&MultiIndex::new(&[n]), &[q, 0.0, 0.0]);
            n += 1;
            let tail = 1.0 - (0..n).map(|k| poisson(eta, k)).sum::<f64>();
            if tail < 1e-10 && n as f64 > eta {
                break;
            }
        }
        assert!((total - 1.0).abs() < 1e-8, "q = {q}: {total}");
    }
}

#[test]
fn form_factor_special_values() {
    assert_eq!(plane_wave_form_factor(&MultiIndex::new(&[0, 0, 0]), &[0.0; 3]).re, 1.0);
    assert_eq!(plane_wave_form_factor(&MultiIndex::new(&[2, 0]), &[0.0; 3]).norm(), 0.0);
    assert!((poisson_weight(&MultiIndex::new(&[1]), &[2f64.sqrt(), 0.0, 0.0]) - (-1f64).exp()).abs() < 1e-15);
}

#[test]
fn pair_density_examples() {
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    assert!((pair_density(&MultiIndex::new(&[0]), &[0.0; 3], &[0.0; 3]) - inv_sqrt_pi).abs() < 1e-15);
    assert_eq!(pair_density(&MultiIndex::new(&[1]), &[0.0; 3], &[0.0; 3]), 0.0);
    let x = [0.75, 0.0, 0.0];
    let a = [0.25, 0.0, 0.0];
    let shifted = pair_density(&MultiIndex::new(&[3]), &x, &a);
    assert_eq!(shifted, pair_density(&MultiIndex::new(&[3]), &[0.5, 0.0, 0.0], &[0.0; 3]));
}

#[test]
fn transition_frequency_is_total_level() {
    assert_eq!(transition_frequency(&MultiIndex::new(&[0, 0, 0])), 0.0);
    assert_eq!(transition_frequency(&MultiIndex::new(&[1, 0, 2])), 3.0);
}

proptest! {
    #[test]
    fn form_factor_is_product_of_poisson_weights(
        n0 in 0u32..12, n1 in 0u32..12, n2 in 0u32..12,
        q0 in -6.0f64..6.0, q1 in -6.0f64..6.0, q2 in -6.0f64..6.0,
    ) {
        let got = poisson_weight(&MultiIndex::new(&[n0, n1, n2]), &[q0, q1, q2]);
        let expect = poisson(q0 * q0 / 2.0, n0) * poisson(q1 * q1 / 2.0, n1) * poisson(q2 * q2 / 2.0, n2);
        prop_assert!((got - expect).abs() <= 1e-13 * expect.max(1e-300) + 1e-300);
    }

    #[test]
    fn form_factor_matches_quadrature(n in 0u32..8, q in -4.0f64..4.0) {
        let h = 0.01;
        let direct: num_complex::Complex64 = (-1500..=1500)
            .map(|i| {
                let y = i as f64 * h;
                num_complex::Complex64::from_polar(hermite_function(n, y) * hermite_function(0, y), q * y)
            })
            .sum::<num_complex::Complex64>()
            * h;
        let closed = plane_wave_form_factor(&MultiIndex::new(&[n]), &[q, 0.0, 0.0]);
        prop_assert!((direct - closed).norm() < 1e-12);
    }
}
