//! Uniform sampling grids and complex fields on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IncidentWave, MultiIndex, Point};

/// Minimum number of points along each used axis.
pub const MIN_POINTS_PER_AXIS: usize = 16;
/// Default margin around the sites, in oscillator lengths.
pub const DEFAULT_MARGIN: f64 = 6.0;

/// A `dim`-dimensional uniform box, stored row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    origin: Point,
    spacing: f64,
    counts: [usize; 3],
}

impl Grid {
    pub fn new(dim: usize, origin: Point, spacing: f64, counts: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) || counts.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: counts.len() });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::NonPositive("grid spacing"));
        }
        if let Some(&c) = counts.iter().find(|&&c| c < MIN_POINTS_PER_AXIS) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("{c} points on an axis, need at least {MIN_POINTS_PER_AXIS}"),
            });
        }
        let mut all = [1; 3];
        all[..dim].copy_from_slice(counts);
        let mut o = [0.0; 3];
        o[..dim].copy_from_slice(&origin[..dim]);
        Ok(Grid { dim, origin: o, spacing, counts: all })
    }

    /// Smallest grid with the given spacing that covers every site plus
    /// `margin` on each side.
    pub fn covering(sites: &[Point], dim: usize, spacing: f64, margin: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::EmptySites);
        }
        let mut origin = [0.0; 3];
        let mut counts = vec![0; dim];
        for j in 0..dim {
            let lo = sites.iter().map(|s| s[j]).fold(f64::INFINITY, f64::min) - margin;
            let hi = sites.iter().map(|s| s[j]).fold(f64::NEG_INFINITY, f64::max) + margin;
            let mut n = ((hi - lo) / spacing).ceil() as usize + 1;
            let mut start = lo;
            if n < MIN_POINTS_PER_AXIS {
                start -= (MIN_POINTS_PER_AXIS - n) as f64 * spacing / 2.0;
                n = MIN_POINTS_PER_AXIS;
            }
            origin[j] = start;
            counts[j] = n;
        }
        Grid::new(dim, origin, spacing, &counts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis]).map(|i| self.coordinate(axis, i)).collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for j in (0..3).rev() {
            idx[j] = flat % self.counts[j];
            flat /= self.counts[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        (idx[0] * self.counts[1] + idx[1]) * self.counts[2] + idx[2]
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 3];
        for j in 0..self.dim {
            p[j] = self.coordinate(j, idx[j]);
        }
        p
    }

    /// Index range along `axis` of the points within `[lo, hi]`.
    pub fn axis_range(&self, axis: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let n = self.counts[axis];
        if axis >= self.dim {
            return 0..1;
        }
        let a = ((lo - self.origin[axis]) / self.spacing).ceil().max(0.0) as usize;
        let b = (((hi - self.origin[axis]) / self.spacing).floor() + 1.0).max(0.0) as usize;
        a.min(n)..b.min(n)
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|j| ((self.counts[j] - 1) as f64 * self.spacing).powi(2)).sum::<f64>().sqrt()
    }

    /// Same box resampled with half the spacing.
    pub fn refined(&self) -> Grid {
        let counts: Vec<usize> = self.counts().iter().map(|c| 2 * c - 1).collect();
        Grid::new(self.dim, self.origin, self.spacing / 2.0, &counts).expect("refinement keeps a valid grid")
    }
}

/// Which scattering channel a field belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Incident,
    Elastic,
    Inelastic { site: usize, n: MultiIndex },
}

/// Complex amplitude on a grid, tagged with its channel and wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub channel: Channel,
    pub k_out: f64,
}

impl ScalarField {
    pub fn zeros(grid: Grid, channel: Channel, k_out: f64) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        ScalarField { grid, values, channel, k_out }
    }

    /// Samples the incident wave on `grid`, normalizing to unit L² norm
    /// when the wave asks for it.
    pub fn incident(grid: &Grid, wave: &IncidentWave) -> Self {
        let values = (0..grid.len()).map(|i| wave.amplitude(&grid.point(i))).collect();
        let field = ScalarField { grid: grid.clone(), values, channel: Channel::Incident, k_out: wave.wavenumber() };
        if wave.normalized() {
            field.normalized()
        } else {
            field
        }
    }

    /// `∫ |ψ|² dᵈx` by the grid rule.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.values.iter_mut().for_each(|v| *v *= s);
        }
        self
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    /// `∫ ψ* φ dᵈx`.
    pub fn inner(&self, other: &ScalarField) -> Complex64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.grid.cell_volume()
    }

    /// L² distance `‖ψ - φ‖`.
    pub fn distance(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        (self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * self.grid.cell_volume())
            .sqrt()
    }

    pub fn max_abs_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_has_margin() {
        let sites = [[0.0, -3.0, 0.0], [5.0, 3.0, 0.0]];
        let g = Grid::covering(&sites, 2, 0.25, DEFAULT_MARGIN).unwrap();
        assert!(g.coordinate(0, 0) <= -6.0);
        assert!(g.coordinate(0, g.counts()[0] - 1) >= 11.0);
        assert!(g.coordinate(1, g.counts()[1] - 1) >= 9.0);
        assert_eq!(g.len(), g.counts()[0] * g.counts()[1]);
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::new(3, [0.0; 3], 0.5, &[16, 17, 18]).unwrap();
        for flat in [0, 1, 17, 300, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, [0.0; 3], 0.0, &[32]).is_err());
        assert!(Grid::new(1, [0.0; 3], 0.1, &[8]).is_err());
        assert!(Grid::new(2, [0.0; 3], 0.1, &[32]).is_err());
    }

    #[test]
    fn axis_range_selects_window() {
        let g = Grid::new(1, [-1.0, 0.0, 0.0], 0.5, &[16]).unwrap();
        let r = g.axis_range(0, -0.2, 1.0);
        assert_eq!(r, 2..5);
        assert_eq!(g.axis_range(0, 100.0, 200.0).len(), 0);
    }

    #[test]
    fn normalized_plane_wave() {
        let g = Grid::new(2, [0.0; 3], 0.1, &[20, 30]).unwrap();
        let wave = IncidentWave::PlaneWave { k: [1.0, 0.5, 0.0], normalize: true };
        let f = ScalarField::incident(&g, &wave);
        assert!((f.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(f.k_out, (1.25f64).sqrt());
    }
}
