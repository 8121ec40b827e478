#![allow(dead_code)]

use qjump_core::model::{build_model, IncidentKind, ModelConfig, RawIncident, RawModel, UnitSystem};

pub fn plane_wave(dim: usize, k: f64, sites: Vec<Vec<f64>>, n_max: u32) -> ModelConfig {
    let mut wavevector = vec![0.0; dim];
    wavevector[0] = k;
    build_model(&RawModel {
        units: UnitSystem::Natural,
        dimension: dim,
        particle_mass: 1.0,
        oscillator_mass: 1.0,
        oscillator_quantum: 1.0,
        sites,
        potential_strength: 1.0,
        potential_range: 0.05,
        incident: RawIncident { kind: IncidentKind::PlaneWave, wavevector, center: None, width: None, normalize: true },
        n_max,
        time_window: None,
        inelastic_branching: 1.0,
    })
    .unwrap()
}

pub fn packet_1d(g: f64, k: f64, center: f64, width: f64, range: f64, sites: Vec<Vec<f64>>, n_max: u32) -> ModelConfig {
    build_model(&RawModel {
        units: UnitSystem::Natural,
        dimension: 1,
        particle_mass: 1.0,
        oscillator_mass: 1.0,
        oscillator_quantum: 1.0,
        sites,
        potential_strength: g,
        potential_range: range,
        incident: RawIncident {
            kind: IncidentKind::Gaussian,
            wavevector: vec![k],
            center: Some(vec![center]),
            width: Some(width),
            normalize: true,
        },
        n_max,
        time_window: None,
        inelastic_branching: 1.0,
    })
    .unwrap()
}

/// `e^{-η} ηⁿ / n!` by a running product.
pub fn poisson(eta: f64, n: u32) -> f64 {
    (1..=n).fold((-eta).exp(), |acc, k| acc * eta / k as f64)
}

/// `C(2n, n) / 4ⁿ / √(2π)`: the q-averaged Poisson weight per axis.
pub fn averaged_pair_weight(n: u32) -> f64 {
    let mut binom = 1.0;
    for k in 0..n {
        binom *= (2 * n - k) as f64 / (n - k) as f64;
    }
    binom / 4f64.powi(n as i32) / (2.0 * std::f64::consts::PI).sqrt()
}
