//! Oscillator-basis matrix elements of a Gaussian interaction.

use crate::hermite::{gauss_hermite, hermite_functions_into};

/// Position-dependent coupling matrices `V_{nn'}(x)` for one site.
///
/// With `V(x - y) = g G_σ(x - y)` the matrix element
/// `g ∫ φ_n(y) φ_{n'}(y) G_σ(u - y) dy` (`u = x - a`) is a polynomial of
/// degree `n + n'` times one Gaussian in `y`, so a Gauss–Hermite rule of
/// order `n_max + 4` centered on that Gaussian integrates it exactly.
pub struct SiteCoupling {
    strength: f64,
    sigma: f64,
    n_max: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SiteCoupling {
    pub fn new(strength: f64, sigma: f64, n_max: u32) -> Self {
        let (nodes, weights) = gauss_hermite(n_max as usize + 4);
        SiteCoupling { strength, sigma, n_max: n_max as usize, nodes, weights }
    }

    /// Symmetric `(n_max+1)²` matrix at offset `u` from the site, row-major.
    pub fn matrix(&self, u: f64) -> Vec<f64> {
        let n = self.n_max + 1;
        let mut out = vec![0.0; n * n];
        let s2 = self.sigma * self.sigma;
        // beyond this the Gaussian prefactor underflows
        if u * u / (1.0 + 2.0 * s2) > 700.0 {
            return out;
        }
        let alpha = 1.0 + 1.0 / (2.0 * s2);
        let mu = u / (1.0 + 2.0 * s2);
        let root = alpha.sqrt();
        let norm_g = 1.0 / (2.0 * std::f64::consts::PI * s2).sqrt();
        let mut h = vec![0.0; n];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let y = mu + t / root;
            hermite_functions_into(y, &mut h);
            let g = norm_g * (-(u - y) * (u - y) / (2.0 * s2)).exp();
            let wt = w * (t * t).exp() / root * g * self.strength;
            for a in 0..n {
                for b in a..n {
                    out[a * n + b] += wt * h[a] * h[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                out[a * n + b] = out[b * n + a];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_function;

    #[test]
    fn ground_element_closed_form() {
        let (g, s) = (0.8, 0.3);
        let c = SiteCoupling::new(g, s, 3);
        for u in [0.0, 0.4, -1.3, 3.0] {
            let v = c.matrix(u)[0];
            let w = 0.5 + s * s;
            let expect = g / (2.0 * std::f64::consts::PI * w).sqrt() * (-u * u / (2.0 * w)).exp();
            assert!((v - expect).abs() < 1e-14, "{u}: {v} vs {expect}");
        }
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let (g, s) = (1.0, 0.4);
        let c = SiteCoupling::new(g, s, 3);
        let u = 0.7;
        let m = c.matrix(u);
        let h = 1e-3;
        for a in 0..4u32 {
            for b in 0..4u32 {
                let direct: f64 = (-12000..=12000)
                    .map(|i| {
                        let y = i as f64 * h;
                        let gs =
                            (-(u - y) * (u - y) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt();
                        hermite_function(a, y) * hermite_function(b, y) * gs
                    })
                    .sum::<f64>()
                    * h;
                assert!((m[(a * 4 + b) as usize] - direct).abs() < 1e-12);
            }
        }
    }
}
