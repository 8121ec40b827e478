use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use super::{channel_probabilities, CoupledState, SiteCoupling, LEAKAGE_LIMIT, NORM_TOLERANCE};
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::model::ModelConfig;

/// Largest admissible step, `0.02 min(1/Ω, m h²/π²)`.
pub fn max_time_step(model: &ModelConfig, spacing: f64) -> f64 {
    0.02 * (model.particle_mass * spacing * spacing / (PI * PI)).min(1.0)
}

/// Local part `diag(E) + V(x)` of the Hamiltonian on every grid point.
pub(crate) fn local_matrices(model: &ModelConfig, labels: &[Vec<u32>], grid: &Grid) -> Vec<DMatrix<f64>> {
    let nc = labels.len();
    let levels = model.n_max as usize + 1;
    let coupling = SiteCoupling::new(model.potential_strength, model.potential_range, model.n_max);
    (0..grid.len())
        .map(|i| {
            let x = grid.coordinate(0, i);
            let site_mats: Vec<Vec<f64>> = model.sites.iter().map(|a| coupling.matrix(x - a[0])).collect();
            DMatrix::from_fn(nc, nc, |r, c| {
                let (lr, lc) = (&labels[r], &labels[c]);
                let differ: Vec<usize> = (0..lr.len()).filter(|&s| lr[s] != lc[s]).collect();
                match differ.len() {
                    0 => {
                        let e = lr.iter().sum::<u32>() as f64;
                        e + (0..lr.len()).map(|s| site_mats[s][lr[s] as usize * levels + lr[s] as usize]).sum::<f64>()
                    }
                    1 => {
                        let s = differ[0];
                        site_mats[s][lr[s] as usize * levels + lc[s] as usize]
                    }
                    _ => 0.0,
                }
            })
        })
        .collect()
}

/// `exp(-i M dt)` for a real symmetric `M`, row-major.
fn exponentiate(m: &DMatrix<f64>, dt: f64) -> Vec<Complex64> {
    let nc = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let phases: Vec<Complex64> = eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)).collect();
    let u = &eig.eigenvectors;
    let mut out = vec![Complex64::new(0.0, 0.0); nc * nc];
    for r in 0..nc {
        for c in 0..nc {
            out[r * nc + c] = (0..nc).map(|k| phases[k] * (u[(r, k)] * u[(c, k)])).sum();
        }
    }
    out
}

struct Kinetic {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Kinetic {
    fn new(grid: &Grid, mass: f64, dt: f64) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let dk = 2.0 * PI / (n as f64 * grid.spacing());
        let phase = |tau: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                    let k = m * dk;
                    Complex64::from_polar(1.0 / n as f64, -k * k / (2.0 * mass) * tau)
                })
                .collect()
        };
        Kinetic {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            half: phase(dt / 2.0),
            full: phase(dt),
        }
    }

    fn apply(&self, psi: &mut [Complex64], phases: &[Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(psi, scratch);
        psi.iter_mut().zip(phases).for_each(|(v, p)| *v *= p);
        self.inverse.process_with_scratch(psi, scratch);
    }
}

/// Propagates `initial` for a time `t` with steps no longer than `dt`.
///
/// The step is shortened so that a whole number of steps fits in `t`.
pub fn evolve(initial: CoupledState, model: &ModelConfig, t: f64, dt: f64) -> Result<CoupledState> {
    if model.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: model.dim });
    }
    if initial.labels != super::configurations(model.sites.len(), model.n_max) {
        return Err(Error::ConfigMismatch);
    }
    if !(t >= 0.0) {
        return Err(Error::NonPositive("evolution time"));
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositive("time step"));
    }
    let bound = max_time_step(model, initial.grid.spacing());
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::TimeStepTooLarge { dt, bound });
    }
    let mut state = initial;
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(state);
    }
    let dt = t / steps as f64;

    let grid = state.grid.clone();
    let nc = state.labels.len();
    let nx = grid.len();
    let h = grid.spacing();
    let local: Vec<Vec<Complex64>> =
        local_matrices(model, &state.labels, &grid).iter().map(|m| exponentiate(m, dt)).collect();
    let damping: Vec<f64> = (0..nx).map(|i| (-state.settings.rate(grid.coordinate(0, i)) * dt).exp()).collect();
    let kinetic = Kinetic::new(&grid, model.particle_mass, dt);
    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        kinetic.forward.get_inplace_scratch_len().max(kinetic.inverse.get_inplace_scratch_len())
    ];
    let mut column = vec![Complex64::new(0.0, 0.0); nc];

    for psi in state.amplitudes.iter_mut() {
        kinetic.apply(psi, &kinetic.half, &mut scratch);
    }
    for step in 0..steps {
        let mut lost = 0.0;
        for i in 0..nx {
            let e = &local[i];
            for (c, slot) in column.iter_mut().enumerate() {
                *slot = state.amplitudes[c][i];
            }
            for r in 0..nc {
                let row = &e[r * nc..(r + 1) * nc];
                let v: Complex64 = row.iter().zip(&column).map(|(a, b)| a * b).sum();
                let d = damping[i];
                if d < 1.0 {
                    lost += v.norm_sqr() * (1.0 - d * d);
                }
                state.amplitudes[r][i] = v * d;
            }
        }
        state.absorbed += lost * h;
        let phases = if step + 1 == steps { &kinetic.half } else { &kinetic.full };
        for psi in state.amplitudes.iter_mut() {
            kinetic.apply(psi, phases, &mut scratch);
        }
    }
    state.time += t;

    let drift = state.total_norm() + state.absorbed - 1.0;
    if drift.abs() > NORM_TOLERANCE {
        return Err(Error::NormDrift(drift.abs()));
    }
    if state.absorbed > state.settings.absorbed_limit {
        return Err(Error::BoundaryFlux(state.absorbed));
    }
    let leaked: f64 =
        channel_probabilities(&state).iter().filter(|p| p.levels.contains(&model.n_max)).map(|p| p.probability).sum();
    if leaked > LEAKAGE_LIMIT {
        return Err(Error::ChannelLeakage(leaked));
    }
    Ok(state)
}
