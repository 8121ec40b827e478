use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ChannelProbability, OracleGrid, SiteCoupling};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbativeSettings {
    pub grid: OracleGrid,
    /// Target spacing of the Simpson rule in `τ`.
    pub time_step: f64,
}

impl Default for PerturbativeSettings {
    fn default() -> Self {
        PerturbativeSettings { grid: OracleGrid { spacing: 0.2, ..OracleGrid::default() }, time_step: 0.01 }
    }
}

/// First-order probability of every singly excited configuration after
/// time `t`, starting from the incident packet with all oscillators in
/// the ground state:
///
/// `ψ_c(t) = -i ∫₀ᵗ dτ e^{-iH_c(t-τ)} V_{c0} e^{-iH_0 τ} ψ_i`.
///
/// Free evolution is exact in momentum space; the `τ` integral uses
/// Simpson's rule.
pub fn first_order_prediction(
    model: &ModelConfig,
    t: f64,
    settings: &PerturbativeSettings,
) -> Result<Vec<ChannelProbability>> {
    if model.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: model.dim });
    }
    if !(t > 0.0) {
        return Err(Error::NonPositive("evolution time"));
    }
    if !(settings.time_step > 0.0) {
        return Err(Error::NonPositive("time step"));
    }
    let grid = settings.grid.grid()?;
    let n = grid.len();
    let h = grid.spacing();
    let mass = model.particle_mass;
    let levels = model.n_max as usize + 1;
    let coupling = SiteCoupling::new(model.potential_strength, model.potential_range, model.n_max);

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let dk = 2.0 * PI / (n as f64 * h);
    let energy: Vec<f64> = (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            (m * dk).powi(2) / (2.0 * mass)
        })
        .collect();

    let mut psi0: Vec<Complex64> = (0..n).map(|i| model.incident.amplitude(&grid.point(i))).collect();
    let norm = (psi0.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt();
    psi0.iter_mut().for_each(|v| *v /= norm);
    forward.process(&mut psi0);

    // (site, level, V_{n0}(x - a))
    let mut channels: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (s, a) in model.sites.iter().enumerate() {
        let mats: Vec<Vec<f64>> = (0..n).map(|i| coupling.matrix(grid.coordinate(0, i) - a[0])).collect();
        for level in 1..levels {
            channels.push((s, level, mats.iter().map(|m| m[level * levels]).collect()));
        }
    }

    let intervals = {
        let k = (t / settings.time_step).ceil() as usize;
        k + k % 2
    };
    let dtau = t / intervals as f64;
    let mut acc = vec![vec![Complex64::new(0.0, 0.0); n]; channels.len()];
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..=intervals {
        let tau = j as f64 * dtau;
        let w = if j == 0 || j == intervals {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for i in 0..n {
            psi[i] = psi0[i] * Complex64::from_polar(1.0 / n as f64, -energy[i] * tau);
        }
        inverse.process(&mut psi);
        for (c, (_, level, v)) in channels.iter().enumerate() {
            for i in 0..n {
                buf[i] = psi[i] * v[i];
            }
            forward.process(&mut buf);
            let e = *level as f64;
            for i in 0..n {
                acc[c][i] += buf[i] * Complex64::from_polar(w, (energy[i] + e) * tau);
            }
        }
    }

    let sites = model.sites.len();
    Ok(channels
        .iter()
        .zip(&acc)
        .map(|((s, level, _), a)| {
            let mut levels = vec![0; sites];
            levels[*s] = *level as u32;
            let sum: f64 = a.iter().map(|v| v.norm_sqr()).sum();
            ChannelProbability { levels, probability: sum * (dtau / 3.0).powi(2) * h / n as f64 }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::tests::weak_model;
    use super::*;

    #[test]
    fn amplitude_scales_linearly() {
        let s = PerturbativeSettings { time_step: 0.05, ..Default::default() };
        let a = first_order_prediction(&weak_model(0.01, vec![vec![0.0]], 2), 5.0, &s).unwrap();
        let b = first_order_prediction(&weak_model(0.02, vec![vec![0.0]], 2), 5.0, &s).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.levels[0] >= 1);
            assert!((y.probability / x.probability - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_coupling_predicts_nothing() {
        let s = PerturbativeSettings { time_step: 0.1, ..Default::default() };
        let p = first_order_prediction(&weak_model(0.0, vec![vec![0.0]], 2), 2.0, &s).unwrap();
        assert!(p.iter().all(|c| c.probability == 0.0));
    }
}
