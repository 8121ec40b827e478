//! Brute-force coupled-channel evolution in one dimension.
//!
//! The oscillators are expanded in their eigenbasis, so the state is one
//! particle amplitude per oscillator configuration. Propagation is
//! Strang splitting: kinetic half steps by FFT and the local
//! energy-plus-coupling matrix exponentiated exactly at every grid point.
//! Used to check first-order predictions at weak coupling.

mod coupling;
mod perturbative;
mod propagate;

pub use coupling::SiteCoupling;
pub use perturbative::{first_order_prediction, PerturbativeSettings};
pub use propagate::{evolve, max_time_step};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::model::{IncidentWave, ModelConfig};

/// Largest number of oscillator configurations the oracle will carry.
pub const MAX_CHANNELS: usize = 64;
/// Tolerance on `Σ P + absorbed - 1`.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Largest population allowed in any channel with a level at `n_max`.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Periodic particle grid and boundary absorber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleGrid {
    /// The grid spans `[-half_width, half_width)`.
    pub half_width: f64,
    pub spacing: f64,
    /// Width of the absorbing layer at each edge.
    pub absorber_width: f64,
    /// Peak absorption rate at the outer edge.
    pub absorber_strength: f64,
    /// Largest absorbed probability tolerated before the run is rejected.
    pub absorbed_limit: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            half_width: 60.0,
            spacing: 0.4,
            absorber_width: 10.0,
            absorber_strength: 2.0,
            absorbed_limit: 1e-6,
        }
    }
}

impl OracleGrid {
    pub fn grid(&self) -> Result<Grid> {
        if !(self.spacing > 0.0 && self.half_width > 0.0) {
            return Err(Error::NonPositive("oracle grid"));
        }
        let count = (2.0 * self.half_width / self.spacing).round() as usize;
        Grid::new(1, [-self.half_width, 0.0, 0.0], self.spacing, &[count])
    }

    /// Absorption rate at `x`: quadratic ramp inside the edge layers.
    pub fn rate(&self, x: f64) -> f64 {
        let depth = x.abs() - (self.half_width - self.absorber_width);
        if depth <= 0.0 || self.absorber_width <= 0.0 {
            0.0
        } else {
            self.absorber_strength * (depth / self.absorber_width).powi(2)
        }
    }
}

/// Oscillator levels of every site, in lexicographic order.
pub fn configurations(sites: usize, n_max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..sites {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..=n_max).map(move |n| {
                    let mut c = c.clone();
                    c.push(n);
                    c
                })
            })
            .collect();
    }
    out
}

/// Particle amplitude per oscillator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub grid: Grid,
    pub settings: OracleGrid,
    /// Oscillator levels per site for each channel.
    pub labels: Vec<Vec<u32>>,
    /// `ψ_c(x)` per channel.
    pub amplitudes: Vec<Vec<Complex64>>,
    pub time: f64,
    /// Probability removed by the absorber so far.
    pub absorbed: f64,
}

impl CoupledState {
    /// Incident packet with every oscillator in its ground state.
    pub fn initial(model: &ModelConfig, settings: &OracleGrid) -> Result<Self> {
        if model.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: model.dim });
        }
        if !matches!(model.incident, IncidentWave::Gaussian { .. }) {
            return Err(Error::InvalidParameter {
                name: "incident",
                reason: "the oracle needs a normalizable gaussian packet".into(),
            });
        }
        let labels = configurations(model.sites.len(), model.n_max);
        if labels.len() > MAX_CHANNELS {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("{} channels, at most {MAX_CHANNELS}", labels.len()),
            });
        }
        let grid = settings.grid()?;
        let mut ground: Vec<Complex64> = (0..grid.len()).map(|i| model.incident.amplitude(&grid.point(i))).collect();
        let norm = (ground.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
        ground.iter_mut().for_each(|v| *v /= norm);
        let mut amplitudes = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; labels.len()];
        amplitudes[0] = ground;
        Ok(CoupledState { grid, settings: *settings, labels, amplitudes, time: 0.0, absorbed: 0.0 })
    }

    /// Energy of each configuration above the ground state, `Σ_I n_I`.
    pub fn energies(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.iter().sum::<u32>() as f64).collect()
    }

    pub fn total_norm(&self) -> f64 {
        self.amplitudes.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }
}

/// Population of one oscillator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProbability {
    pub levels: Vec<u32>,
    pub probability: f64,
}

/// `P(c) = ∫ |ψ_c|² dx` for every channel.
pub fn channel_probabilities(state: &CoupledState) -> Vec<ChannelProbability> {
    state
        .labels
        .iter()
        .zip(&state.amplitudes)
        .map(|(l, a)| ChannelProbability {
            levels: l.clone(),
            probability: a.iter().map(|v| v.norm_sqr()).sum::<f64>() * state.grid.spacing(),
        })
        .collect()
}

/// Probability that exactly one site, and that two or more sites, are excited.
pub fn excitation_counts(probabilities: &[ChannelProbability]) -> (f64, f64) {
    let mut single = 0.0;
    let mut multiple = 0.0;
    for p in probabilities {
        match p.levels.iter().filter(|&&n| n > 0).count() {
            0 => {}
            1 => single += p.probability,
            _ => multiple += p.probability,
        }
    }
    (single, multiple)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, IncidentKind, RawIncident, RawModel, UnitSystem};

    pub(crate) fn weak_model(g: f64, sites: Vec<Vec<f64>>, n_max: u32) -> ModelConfig {
        build_model(&RawModel {
            units: UnitSystem::Natural,
            dimension: 1,
            particle_mass: 1.0,
            oscillator_mass: 1.0,
            oscillator_quantum: 1.0,
            sites,
            potential_strength: g,
            potential_range: 0.3,
            incident: RawIncident {
                kind: IncidentKind::Gaussian,
                wavevector: vec![1.6],
                center: Some(vec![-25.0]),
                width: Some(3.0),
                normalize: true,
            },
            n_max,
            time_window: None,
            inelastic_branching: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn initial_state_is_ground() {
        let m = weak_model(0.01, vec![vec![0.0]], 4);
        let s = CoupledState::initial(&m, &OracleGrid::default()).unwrap();
        let p = channel_probabilities(&s);
        assert_eq!(p.len(), 5);
        assert!((p[0].probability - 1.0).abs() < 1e-14);
        assert!(p[1..].iter().all(|c| c.probability == 0.0));
    }

    #[test]
    fn product_channels() {
        let c = configurations(2, 2);
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], vec![0, 0]);
        assert_eq!(c[5], vec![1, 2]);
        let probs: Vec<ChannelProbability> =
            c.iter().map(|l| ChannelProbability { levels: l.clone(), probability: 1.0 }).collect();
        assert_eq!(excitation_counts(&probs), (4.0, 4.0));
    }

    #[test]
    fn absorber_profile() {
        let g = OracleGrid::default();
        assert_eq!(g.rate(0.0), 0.0);
        assert_eq!(g.rate(49.0), 0.0);
        assert!((g.rate(60.0) - 2.0).abs() < 1e-12);
        assert!((g.rate(-55.0) - 0.5).abs() < 1e-12);
    }
}
