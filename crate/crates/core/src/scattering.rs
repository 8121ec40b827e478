//! First-order scattered waves off an oscillator array.
//!
//! In the long-time, short-range limit the inelastic wave for channel
//! `(I, n)` is the piece `φ_n(x-a_I) φ_0(x-a_I) ψ_i(x)` cut out of the
//! incoming wave, and the elastic wave is the coherent sum of the
//! ground-state pieces over all sites. Both carry the prefactor
//! `m g / (2πiħ²)`; only ratios of their norms matter for jump statistics.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Channel, ScalarField};
use crate::hermite::hermite_functions_into;
use crate::model::{norm, transition_frequency, ModelConfig, MultiIndex, Point};

/// Multiple of `1/|ε|` a time window must exceed before the energy
/// window is replaced by a delta function. Sinc side lobes then leak
/// less than 1%.
pub const DELTA_LIMIT_FACTOR: f64 = 100.0;

/// Minimum ratio of detector distance to source diameter.
pub const FRAUNHOFER_FACTOR: f64 = 100.0;

/// Root of `sin(u)/u = 1/2`.
const SINC_HALF_MAX: f64 = 1.895_494_267_033_981;

/// Normalized energy window `sin(εT/2)/(πε)`, tending to `δ(ε)` as `T → ∞`.
pub fn energy_window(eps: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositive("time window"));
    }
    let x = 0.5 * eps * t;
    if x.abs() < 1e-6 {
        // series of sin(x)/x
        Ok(t / (2.0 * PI) * (1.0 - x * x / 6.0))
    } else {
        Ok(x.sin() / (PI * eps))
    }
}

/// Energy mismatch `ω_n + (k² - k'²)/2m` between incoming wavenumber `k_prime`
/// and outgoing wavenumber `k`.
pub fn energy_mismatch(n: &MultiIndex, k: f64, k_prime: f64, mass: f64) -> f64 {
    transition_frequency(n) + (k * k - k_prime * k_prime) / (2.0 * mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLimit {
    pub satisfied: bool,
    /// Zero mismatch: no finite window suffices.
    pub degenerate: bool,
    /// Smallest window that qualifies, `C/|ε|` (infinite when degenerate).
    pub threshold: f64,
}

/// Whether `T ≥ C/|ε|` with `C =` [`DELTA_LIMIT_FACTOR`].
pub fn delta_limit_satisfied(n: &MultiIndex, k: f64, k_prime: f64, t: f64, mass: f64) -> DeltaLimit {
    let eps = energy_mismatch(n, k, k_prime, mass);
    if eps == 0.0 {
        return DeltaLimit { satisfied: false, degenerate: true, threshold: f64::INFINITY };
    }
    let threshold = DELTA_LIMIT_FACTOR / eps.abs();
    DeltaLimit { satisfied: t >= threshold, degenerate: false, threshold }
}

/// `k_out = √(k_in² - 2mω_n)`: the particle hands `ω_n` to the oscillator.
pub fn outgoing_wavenumber(k_in: f64, n: &MultiIndex, mass: f64) -> Result<f64> {
    if !(k_in > 0.0) {
        return Err(Error::NonPositive("wavenumber"));
    }
    let threshold = 2.0 * mass * transition_frequency(n);
    let k_in_sq = k_in * k_in;
    if k_in_sq < threshold {
        return Err(Error::ChannelClosed { k_in_sq, threshold });
    }
    Ok((k_in_sq - threshold).sqrt())
}

pub fn channel_open(k_in: f64, n: &MultiIndex, mass: f64) -> bool {
    k_in * k_in >= 2.0 * mass * transition_frequency(n)
}

/// `m g / (2πi)` in natural units.
pub fn source_prefactor(model: &ModelConfig) -> Complex64 {
    Complex64::new(0.0, -model.particle_mass * model.potential_strength / (2.0 * PI))
}

/// `φ_n(x-a) φ_0(x-a)` on every grid point.
fn pair_density_on_grid(psi: &ScalarField, n: &MultiIndex, a: &Point) -> Vec<f64> {
    let grid = &psi.grid;
    let dim = grid.dim();
    let tables: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            if j < dim {
                grid.axis(j)
                    .iter()
                    .map(|&x| {
                        let mut h = vec![0.0; n.levels()[j] as usize + 1];
                        hermite_functions_into(x - a[j], &mut h);
                        h[n.levels()[j] as usize] * h[0]
                    })
                    .collect()
            } else {
                vec![1.0]
            }
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let idx = grid.multi_index(i);
            tables[0][idx[0]] * tables[1][idx[1]] * tables[2][idx[2]]
        })
        .collect()
}

/// Inelastic wave for channel `(site, n)`: the incident wave cut out by
/// the transition density of that site.
pub fn inelastic_source(psi: &ScalarField, model: &ModelConfig, site: usize, n: &MultiIndex) -> Result<ScalarField> {
    if n.dim() != model.dim || psi.grid.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: n.dim() });
    }
    if n.is_zero() {
        return Err(Error::InvalidParameter { name: "n", reason: "inelastic channel needs n != 0".into() });
    }
    if n.max_level() > model.n_max {
        return Err(Error::LevelOutOfRange { n: n.max_level(), n_max: model.n_max });
    }
    let a = model
        .sites
        .get(site)
        .ok_or(Error::InvalidParameter { name: "site", reason: format!("index {site} out of range") })?;
    let k_out = outgoing_wavenumber(psi.k_out, n, model.particle_mass)?;
    let pref = source_prefactor(model);
    let rho = pair_density_on_grid(psi, n, a);
    let values = psi.values.iter().zip(&rho).map(|(v, r)| pref * r * v).collect();
    Ok(ScalarField { grid: psi.grid.clone(), values, channel: Channel::Inelastic { site, n: *n }, k_out })
}

/// Elastic wave: coherent sum of the ground-state pieces of every site.
pub fn elastic_source(psi: &ScalarField, model: &ModelConfig) -> ScalarField {
    let zero = MultiIndex::zero(model.dim);
    let mut rho = vec![0.0; psi.grid.len()];
    for a in &model.sites {
        for (acc, r) in rho.iter_mut().zip(pair_density_on_grid(psi, &zero, a)) {
            *acc += r;
        }
    }
    let pref = source_prefactor(model);
    let values = psi.values.iter().zip(&rho).map(|(v, r)| pref * r * v).collect();
    ScalarField { grid: psi.grid.clone(), values, channel: Channel::Elastic, k_out: psi.k_out }
}

/// `A(q) = ∫ e^{-iq·x} s(x) dᵈx` by the grid rule.
pub fn fourier_amplitude(source: &ScalarField, q: &Point) -> Complex64 {
    let grid = &source.grid;
    let phases: Vec<Vec<Complex64>> = (0..3)
        .map(|j| {
            if j < grid.dim() {
                grid.axis(j).iter().map(|&x| Complex64::from_polar(1.0, -q[j] * x)).collect()
            } else {
                vec![Complex64::new(1.0, 0.0)]
            }
        })
        .collect();
    let c = grid.counts();
    let (n1, n2) = (if c.len() > 1 { c[1] } else { 1 }, if c.len() > 2 { c[2] } else { 1 });
    let mut total = Complex64::new(0.0, 0.0);
    for (i0, p0) in phases[0].iter().enumerate() {
        let mut row = Complex64::new(0.0, 0.0);
        for (i1, p1) in phases[1].iter().enumerate() {
            let base = (i0 * n1 + i1) * n2;
            let inner: Complex64 = source.values[base..base + n2].iter().zip(&phases[2]).map(|(v, p)| v * p).sum();
            row += p1 * inner;
        }
        total += p0 * row;
    }
    total * grid.cell_volume()
}

/// Detector plane perpendicular to axis 0 at `distance` from the origin.
/// Pixel centers are the transverse coordinates (axes 1 and 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPlane {
    pub distance: f64,
    pub pixels: Vec<[f64; 2]>,
    pub pixel_width: f64,
}

impl DetectorPlane {
    pub fn new(distance: f64, pixels: Vec<[f64; 2]>, pixel_width: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::NonPositive("detector distance"));
        }
        if !(pixel_width > 0.0) {
            return Err(Error::NonPositive("pixel width"));
        }
        for i in 0..pixels.len() {
            for j in 0..i {
                let d = (pixels[i][0] - pixels[j][0]).abs().max((pixels[i][1] - pixels[j][1]).abs());
                if d < pixel_width * (1.0 - 1e-12) {
                    return Err(Error::OverlappingPixels(j, i));
                }
            }
        }
        Ok(DetectorPlane { distance, pixels, pixel_width })
    }

    /// Evenly spaced pixels along axis 1, centered on the beam.
    pub fn line(distance: f64, count: usize, spacing: f64) -> Result<Self> {
        let half = (count as f64 - 1.0) / 2.0;
        let pixels = (0..count).map(|i| [(i as f64 - half) * spacing, 0.0]).collect();
        DetectorPlane::new(distance, pixels, spacing)
    }

    /// Unit vector from the origin to pixel `p`.
    pub fn direction(&self, p: usize) -> Point {
        direction_to(&[self.distance, self.pixels[p][0], self.pixels[p][1]])
    }

    /// Momentum-transfer Fourier variable for pixel `p`: `k_out` along the
    /// pixel direction.
    pub fn wavevector(&self, p: usize, k_out: f64) -> Point {
        let d = self.direction(p);
        [k_out * d[0], k_out * d[1], k_out * d[2]]
    }

    pub fn check_far_field(&self, source_diameter: f64) -> Result<()> {
        let required = FRAUNHOFER_FACTOR * source_diameter;
        if self.distance < required {
            return Err(Error::FraunhoferViolated { distance: self.distance, required });
        }
        Ok(())
    }
}

pub(crate) fn direction_to(r: &Point) -> Point {
    let len = norm(r);
    [r[0] / len, r[1] / len, r[2] / len]
}

/// Far-field amplitude per pixel, `A = ∫ e^{-iκ·x} s(x) dᵈx` with `κ` the
/// outgoing wavevector pointing at the pixel. `|A|²` is the arrival
/// density up to one constant per run.
pub fn far_field(source: &ScalarField, plane: &DetectorPlane) -> Result<Vec<Complex64>> {
    let dim = source.grid.dim();
    if dim < 2 {
        return Err(Error::InvalidParameter { name: "dimension", reason: "far field needs d >= 2".into() });
    }
    plane.check_far_field(source.grid.diameter())?;
    Ok((0..plane.pixels.len())
        .into_par_iter()
        .map(|p| {
            let mut q = plane.wavevector(p, source.k_out);
            if dim == 2 {
                // the plane's second transverse axis does not exist
                q[2] = 0.0;
            }
            fourier_amplitude(source, &q)
        })
        .collect())
}

/// Half width at half maximum of the normalized sinc `sin(Kr)/(πr)` with
/// `K = √(k² + 2mω_n)` evaluated at wavenumber `k`.
pub fn kernel_half_width(k: f64, n: &MultiIndex, mass: f64) -> f64 {
    let big_k = (k * k + 2.0 * mass * transition_frequency(n)).sqrt();
    SINC_HALF_MAX / big_k
}

/// Relative change of the inelastic source norm when the incident wave is
/// first smoothed by the outgoing kernel `sin(K|x-x'|)/(π|x-x'|)` instead
/// of its delta-function limit, with `K` taken at the incident wavenumber.
///
/// One dimension only. In 1D the kernel is an ideal low-pass filter at
/// `K`, applied by FFT to the incident wave sampled on a padded grid under
/// a broad Gaussian window centered on the site; the window is wide enough
/// that its own spectral spread stays inside the passband.
pub fn kernel_collapse_error(model: &ModelConfig, site: usize, n: &MultiIndex) -> Result<f64> {
    if model.dim != 1 || n.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: model.dim });
    }
    if n.is_zero() {
        return Err(Error::InvalidParameter { name: "n", reason: "inelastic channel needs n != 0".into() });
    }
    let a = model
        .sites
        .get(site)
        .ok_or(Error::InvalidParameter { name: "site", reason: format!("index {site} out of range") })?;
    let k_in = model.wavenumber();
    outgoing_wavenumber(k_in, n, model.particle_mass)?;
    let big_k = (k_in * k_in + 2.0 * model.particle_mass * transition_frequency(n)).sqrt();
    // Gaussian window leaks e^{-(K-k)²Λ²/2} past the cutoff
    let lambda = (2.0 * 30.0f64).sqrt() / (big_k - k_in) + 10.0;
    let h = (PI / (4.0 * big_k)).min(0.05);
    let len = (16.0 * lambda / h).ceil() as usize;
    let x0 = a[0] - 8.0 * lambda;
    let xs: Vec<f64> = (0..len).map(|i| x0 + i as f64 * h).collect();
    let windowed: Vec<Complex64> = xs
        .iter()
        .map(|&x| {
            let u = (x - a[0]) / lambda;
            model.incident.amplitude(&[x, 0.0, 0.0]) * (-0.5 * u * u).exp()
        })
        .collect();
    let mut buf = windowed.clone();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let dk = 2.0 * PI / (len as f64 * h);
    for (i, v) in buf.iter_mut().enumerate() {
        let m = if i <= len / 2 { i as f64 } else { i as f64 - len as f64 };
        if (m * dk).abs() > big_k {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let level = n.levels()[0] as usize;
    let mut herm = vec![0.0; level + 1];
    let (mut exact, mut approx) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        hermite_functions_into(x - a[0], &mut herm);
        let rho = herm[level] * herm[0];
        if rho == 0.0 {
            continue;
        }
        exact += (rho * windowed[i]).norm_sqr();
        approx += (rho * buf[i] / len as f64).norm_sqr();
    }
    Ok((approx - exact).abs() / exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::model::IncidentWave;

    #[test]
    fn energy_window_peak_and_errors() {
        assert!((energy_window(0.0, 3.0).unwrap() - 3.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(energy_window(1.0, 0.0).is_err());
        assert!(energy_window(1.0, -1.0).is_err());
        // continuous across the series switch
        let a = energy_window(1e-7, 5.0).unwrap();
        let b = energy_window(1e-5, 5.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn delta_limit_cases() {
        let n = MultiIndex::new(&[1, 0, 0]);
        assert!(delta_limit_satisfied(&n, 2.0, 2.0, 1000.0, 1.0).satisfied);
        assert!(!delta_limit_satisfied(&n, 2.0, 2.0, 0.1, 1.0).satisfied);
        let z = MultiIndex::zero(3);
        let d = delta_limit_satisfied(&z, 2.0, 2.0, 1e9, 1.0);
        assert!(!d.satisfied && d.degenerate);
    }

    #[test]
    fn outgoing_wavenumber_kinematics() {
        let m = 0.7;
        assert_eq!(outgoing_wavenumber(1.3, &MultiIndex::zero(3), m).unwrap(), 1.3);
        let n = MultiIndex::new(&[1, 0, 0]);
        let k_th = (2.0 * m).sqrt();
        assert!(outgoing_wavenumber(k_th, &n, m).unwrap().abs() < 1e-7);
        let k = (4.0 * m).sqrt();
        assert!((outgoing_wavenumber(k, &n, m).unwrap() - k / 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(outgoing_wavenumber(0.5 * k_th, &n, m), Err(Error::ChannelClosed { .. })));
    }

    #[test]
    fn fourier_amplitude_at_zero_is_integral() {
        let g = Grid::new(2, [-3.0, -2.0, 0.0], 0.2, &[31, 21]).unwrap();
        let wave = IncidentWave::Gaussian { k: [1.0, 0.3, 0.0], center: [0.0; 3], width: 0.7, normalize: true };
        let f = ScalarField::incident(&g, &wave);
        let sum: Complex64 = f.values.iter().sum::<Complex64>() * g.cell_volume();
        assert!((fourier_amplitude(&f, &[0.0; 3]) - sum).norm() < 1e-13);
    }

    #[test]
    fn detector_plane_validation() {
        assert!(DetectorPlane::new(10.0, vec![[0.0, 0.0], [0.5, 0.0]], 1.0).is_err());
        assert!(DetectorPlane::line(10.0, 5, 1.0).is_ok());
        assert!(DetectorPlane::line(0.0, 5, 1.0).is_err());
    }
}
