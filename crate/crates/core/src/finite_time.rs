//! Finite-time first-order amplitude in one dimension.
//!
//! With a symmetric window `[-T/2, T/2]` around the fiducial time the
//! channel amplitude in momentum space is
//!
//! ```text
//! c_T(k) = -i ∫dk' W(k - k') ψ̃(k') sin(εT/2)/(πε),   ε = ω_n + (k² - k'²)/2m
//! ```
//!
//! where `W(q) = g e^{-iqa} e^{-q²σ²/2} ∫dy e^{-iqy} φ_n(y) φ_0(y)` collects
//! the position integrals. The `y` integral is done by quadrature, the `k'`
//! integral on a grid fine enough to resolve the sinc oscillation, and the
//! result is transformed back to a position grid. As `T → ∞` the sinc
//! becomes `δ(ε)`, which [`delta_limit_amplitude`] evaluates directly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Channel, Grid, ScalarField};
use crate::hermite::hermite_functions_into;
use crate::model::{transition_frequency, IncidentWave, ModelConfig, MultiIndex};
use crate::scattering::{energy_window, outgoing_wavenumber};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteTimeSettings {
    /// Spacing of the outgoing momentum grid.
    pub k_spacing: f64,
    /// Incoming-momentum samples per period of the sinc oscillation.
    pub samples_per_period: f64,
    /// Spacing of the `y` quadrature.
    pub y_spacing: f64,
    /// Spacing of the returned position grid.
    pub x_spacing: f64,
    /// Packet widths kept on each side, in momentum and in position.
    pub cutoff_widths: f64,
    /// Largest number of integrand evaluations allowed.
    pub budget: u64,
}

impl Default for FiniteTimeSettings {
    fn default() -> Self {
        FiniteTimeSettings {
            k_spacing: 0.05,
            samples_per_period: 16.0,
            y_spacing: 0.05,
            x_spacing: 0.1,
            cutoff_widths: 6.0,
            budget: 1_000_000_000,
        }
    }
}

/// Gaussian packet data in natural units, and its momentum amplitude.
struct Packet {
    k0: f64,
    center: f64,
    width: f64,
    amp: f64,
}

impl Packet {
    fn from_model(model: &ModelConfig) -> Result<Self> {
        if model.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: model.dim });
        }
        match &model.incident {
            IncidentWave::Gaussian { k, center, width, normalize } => Ok(Packet {
                k0: k[0],
                center: center[0],
                width: *width,
                amp: if *normalize { (2.0 * PI * width * width).powf(-0.25) } else { 1.0 },
            }),
            IncidentWave::PlaneWave { .. } => Err(Error::InvalidParameter {
                name: "incident",
                reason: "finite-time amplitudes need a gaussian packet".into(),
            }),
        }
    }

    /// `(2π)^{-1/2} ∫ e^{-ikx} ψ(x) dx`.
    fn momentum(&self, k: f64) -> Complex64 {
        let d = k - self.k0;
        let mag = self.amp * self.width * 2.0f64.sqrt() * (-d * d * self.width * self.width).exp();
        Complex64::from_polar(mag, -d * self.center)
    }

    /// Momenta where `|ψ̃| > e^{-cutoff²}` relative to its peak.
    fn k_range(&self, cutoff: f64) -> (f64, f64) {
        let half = cutoff / self.width;
        (self.k0 - half, self.k0 + half)
    }
}

/// `W(q)` for one channel, by trapezoid quadrature over `y`.
fn coupling(model: &ModelConfig, site: usize, level: u32, y_spacing: f64, q: f64) -> Complex64 {
    let a = model.sites[site][0];
    let sigma = model.potential_range;
    let reach = 8.0 + (2.0 * level as f64 + 1.0).sqrt();
    let count = (2.0 * reach / y_spacing).ceil() as usize + 1;
    let mut h = vec![0.0; level as usize + 1];
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..count {
        let y = -reach + i as f64 * y_spacing;
        hermite_functions_into(y, &mut h);
        sum += Complex64::from_polar(h[level as usize] * h[0], -q * y);
    }
    let g = model.potential_strength * (-0.5 * q * q * sigma * sigma).exp();
    sum * y_spacing * g * Complex64::from_polar(1.0, -q * a)
}

fn check_channel(model: &ModelConfig, site: usize, n: &MultiIndex) -> Result<f64> {
    if n.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: n.dim() });
    }
    if site >= model.sites.len() {
        return Err(Error::InvalidParameter { name: "site", reason: format!("index {site} out of range") });
    }
    if n.max_level() > model.n_max {
        return Err(Error::LevelOutOfRange { n: n.max_level(), n_max: model.n_max });
    }
    outgoing_wavenumber(model.wavenumber(), n, model.particle_mass)
}

/// Outgoing momentum grid and position grid shared by every `T`.
fn grids(packet: &Packet, model: &ModelConfig, site: usize, s: &FiniteTimeSettings) -> Result<(Vec<f64>, Grid)> {
    let (_, kp_hi) = packet.k_range(s.cutoff_widths);
    let k_hi = kp_hi.abs().max(packet.k_range(s.cutoff_widths).0.abs());
    let nk = (2.0 * k_hi / s.k_spacing).ceil() as usize + 1;
    let ks = (0..nk).map(|i| -k_hi + i as f64 * s.k_spacing).collect();
    let a = model.sites[site][0];
    let reach = 2.0 * s.cutoff_widths * packet.width + (packet.center - a).abs();
    let nx = (2.0 * reach / s.x_spacing).ceil() as usize + 1;
    let grid = Grid::new(1, [a - reach, 0.0, 0.0], s.x_spacing, &[nx])?;
    if 2.0 * reach > 2.0 * PI / s.k_spacing {
        return Err(Error::InvalidParameter {
            name: "k_spacing",
            reason: "momentum grid too coarse for the position window".into(),
        });
    }
    Ok((ks, grid))
}

/// `ψ(x) = (2π)^{-1/2} Σ_k c(k) e^{ikx} Δk`.
fn to_position(ks: &[f64], c: &[Complex64], dk: f64, grid: Grid, channel: Channel, k_out: f64) -> ScalarField {
    let norm = dk / (2.0 * PI).sqrt();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.coordinate(0, i);
            ks.iter().zip(c).map(|(&k, v)| v * Complex64::from_polar(1.0, k * x)).sum::<Complex64>() * norm
        })
        .collect();
    ScalarField { grid, values, channel, k_out }
}

fn channel_tag(site: usize, n: &MultiIndex) -> Channel {
    if n.is_zero() {
        Channel::Elastic
    } else {
        Channel::Inelastic { site, n: *n }
    }
}

/// Scattered field of channel `(site, n)` after a window of length `t`
/// centered on the fiducial time, for a 1D Gaussian incident packet.
pub fn finite_time_amplitude(
    model: &ModelConfig,
    site: usize,
    n: &MultiIndex,
    t: f64,
    settings: &FiniteTimeSettings,
) -> Result<ScalarField> {
    if !(t > 0.0) {
        return Err(Error::NonPositive("time window"));
    }
    let k_out = check_channel(model, site, n)?;
    let packet = Packet::from_model(model)?;
    let (ks, grid) = grids(&packet, model, site, settings)?;
    let (kp_lo, kp_hi) = packet.k_range(settings.cutoff_widths);
    let mass = model.particle_mass;
    let omega = transition_frequency(n);
    let level = n.levels()[0];

    // sinc phase advances by about T k'/2m per unit k'
    let k_abs = kp_lo.abs().max(kp_hi.abs());
    let period = 4.0 * PI * mass / (t * k_abs);
    let target = (period / settings.samples_per_period).min(0.01 / packet.width.max(1.0));
    let ratio = (settings.k_spacing / target).ceil().max(1.0) as i64;
    let dkp = settings.k_spacing / ratio as f64;
    // incoming grid on the same lattice as the outgoing grid
    let k_lo = ks[0];
    let j_lo = ((kp_lo - k_lo) / dkp).floor() as i64;
    let j_hi = ((kp_hi - k_lo) / dkp).ceil() as i64;
    let nkp = (j_hi - j_lo + 1) as usize;
    // q = k - k' = (i ratio - j) dkp over all pairs
    let m_lo = -j_hi;
    let m_hi = (ks.len() as i64 - 1) * ratio - j_lo;
    let nq = (m_hi - m_lo + 1) as usize;
    let ny = (2.0 * (8.0 + (2.0 * level as f64 + 1.0).sqrt()) / settings.y_spacing) as u64 + 1;
    let needed = ks.len() as u64 * nkp as u64 + nq as u64 * ny;
    if needed > settings.budget {
        return Err(Error::QuadratureBudget { needed, budget: settings.budget });
    }

    let w: Vec<Complex64> = (0..nq)
        .into_par_iter()
        .map(|i| coupling(model, site, level, settings.y_spacing, (m_lo + i as i64) as f64 * dkp))
        .collect();
    let incoming: Vec<(f64, Complex64)> = (0..nkp)
        .map(|j| {
            let kp = k_lo + (j_lo + j as i64) as f64 * dkp;
            (kp, packet.momentum(kp))
        })
        .collect();

    let c: Vec<Complex64> = ks
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut sum = Complex64::new(0.0, 0.0);
            for (j, &(kp, psi)) in incoming.iter().enumerate() {
                let eps = omega + (k * k - kp * kp) / (2.0 * mass);
                let m = i as i64 * ratio - (j_lo + j as i64);
                let window = energy_window(eps, t).expect("positive window");
                sum += w[(m - m_lo) as usize] * psi * window;
            }
            Complex64::new(0.0, -1.0) * sum * dkp
        })
        .collect();
    Ok(to_position(&ks, &c, settings.k_spacing, grid, channel_tag(site, n), k_out))
}

/// The `T → ∞` limit of [`finite_time_amplitude`]: the sinc becomes
/// `δ(ε)`, which picks `k' = ±√(k² + 2mω_n)`.
pub fn delta_limit_amplitude(
    model: &ModelConfig,
    site: usize,
    n: &MultiIndex,
    settings: &FiniteTimeSettings,
) -> Result<ScalarField> {
    if n.is_zero() {
        // m/K diverges at k = 0 without an energy gap
        return Err(Error::DegenerateMismatch);
    }
    let k_out = check_channel(model, site, n)?;
    let packet = Packet::from_model(model)?;
    let (ks, grid) = grids(&packet, model, site, settings)?;
    let mass = model.particle_mass;
    let omega = transition_frequency(n);
    let level = n.levels()[0];
    let c: Vec<Complex64> = ks
        .par_iter()
        .map(|&k| {
            let big_k = (k * k + 2.0 * mass * omega).sqrt();
            let sum: Complex64 = [big_k, -big_k]
                .iter()
                .map(|&kp| coupling(model, site, level, settings.y_spacing, k - kp) * packet.momentum(kp))
                .sum();
            Complex64::new(0.0, -1.0) * sum * (mass / big_k)
        })
        .collect();
    Ok(to_position(&ks, &c, settings.k_spacing, grid, channel_tag(site, n), k_out))
}

/// Relative L² distance `‖ψ_T - ψ_∞‖ / ‖ψ_∞‖` for each window in `times`.
pub fn convergence_ladder(
    model: &ModelConfig,
    site: usize,
    n: &MultiIndex,
    times: &[f64],
    settings: &FiniteTimeSettings,
) -> Result<Vec<f64>> {
    let reference = delta_limit_amplitude(model, site, n, settings)?;
    let scale = reference.norm_sqr().sqrt();
    times
        .iter()
        .map(|&t| Ok(finite_time_amplitude(model, site, n, t, settings)?.distance(&reference) / scale))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, IncidentKind, RawIncident, RawModel, UnitSystem};

    fn packet_model(g: f64) -> ModelConfig {
        build_model(&RawModel {
            units: UnitSystem::Natural,
            dimension: 1,
            particle_mass: 1.0,
            oscillator_mass: 1.0,
            oscillator_quantum: 1.0,
            sites: vec![vec![0.0]],
            potential_strength: g,
            potential_range: 0.01,
            incident: RawIncident {
                kind: IncidentKind::Gaussian,
                wavevector: vec![3.0],
                center: Some(vec![0.0]),
                width: Some(2.0),
                normalize: true,
            },
            n_max: 4,
            time_window: None,
            inelastic_branching: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn packet_momentum_is_normalized() {
        let p = Packet::from_model(&packet_model(1.0)).unwrap();
        let dk = 0.001;
        let total: f64 = (0..6000).map(|i| p.momentum(i as f64 * dk).norm_sqr()).sum::<f64>() * dk;
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn coupling_matches_closed_form() {
        let m = packet_model(0.7);
        for q in [0.0, 0.5, 2.0, -3.0] {
            for level in 0..3 {
                let f = crate::model::plane_wave_form_factor(&MultiIndex::new(&[level]), &[-q, 0.0, 0.0]);
                let expect = f * 0.7 * (-0.5 * q * q * 1e-4f64).exp();
                assert!((coupling(&m, 0, level, 0.05, q) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_potential_gives_zero_field() {
        let f = finite_time_amplitude(&packet_model(0.0), 0, &MultiIndex::new(&[1]), 5.0, &Default::default()).unwrap();
        assert_eq!(f.max_abs_sqr(), 0.0);
    }

    #[test]
    fn amplitude_is_linear_in_strength() {
        let s = FiniteTimeSettings::default();
        let n = MultiIndex::new(&[1]);
        let a = finite_time_amplitude(&packet_model(0.3), 0, &n, 4.0, &s).unwrap();
        let b = finite_time_amplitude(&packet_model(0.6), 0, &n, 4.0, &s).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x * 2.0 - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn budget_guard() {
        let s = FiniteTimeSettings { budget: 1000, ..Default::default() };
        let r = finite_time_amplitude(&packet_model(1.0), 0, &MultiIndex::new(&[1]), 5.0, &s);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn closed_channel_rejected() {
        let r = finite_time_amplitude(&packet_model(1.0), 0, &MultiIndex::new(&[4]), 5.0, &Default::default());
        assert!(r.is_ok());
        let m = packet_model(1.0);
        let too_high = MultiIndex::new(&[4]);
        // k0 = 3 opens |n| <= 4; a slower packet closes it
        let mut slow = m.clone();
        slow.incident = IncidentWave::Gaussian { k: [2.0, 0.0, 0.0], center: [0.0; 3], width: 2.0, normalize: true };
        assert!(matches!(
            finite_time_amplitude(&slow, 0, &too_high, 5.0, &Default::default()),
            Err(Error::ChannelClosed { .. })
        ));
    }
}
