//! Two-stage runs: elastic diffraction off one array, detection by
//! inelastic jumps in a second array.
//!
//! The elastic stage is coherent and the same for every particle, so it is
//! computed once: the elastic wave of the diffractor is propagated to the
//! far field and laid onto a grid around the detector sites. Only the
//! second stage is random. Each shot draws one outcome from the detector's
//! probability table with its own generator stream, so histograms do not
//! depend on how shots are spread across workers.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Channel, Grid, ScalarField, DEFAULT_MARGIN};
use crate::jumps::{jump_weights, normalize, shot_rng, Outcome, ProbabilityTable};
use crate::model::{build_model, IncidentKind, ModelConfig, RawIncident, RawModel};
use crate::scattering::{direction_to, elastic_source, fourier_amplitude, DetectorPlane};

fn default_pixel_spacing_lengths() -> f64 {
    4.0
}
fn default_n_max() -> u32 {
    8
}
fn default_branching() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}

/// Detector array as written in a configuration file (input units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetector {
    pub oscillator_mass: f64,
    pub oscillator_quantum: f64,
    /// Distance of the detector plane along axis 0.
    pub distance: f64,
    pub pixel_count: usize,
    /// Pixel pitch; defaults to four oscillator lengths of the detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_spacing: Option<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default = "default_branching")]
    pub inelastic_branching: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_range: Option<f64>,
}

/// Grid resolution, in oscillator lengths of each array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub diffractor_spacing: f64,
    pub detector_spacing: f64,
    pub margin: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { diffractor_spacing: 0.25, detector_spacing: 0.25, margin: DEFAULT_MARGIN }
    }
}

/// How [`visibility`] picks and smooths the central lobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityOptions {
    /// Width of the centered moving average, in pixels (1 = none).
    pub smoothing: usize,
    /// The central lobe is the pixels within this many pixels of the
    /// count-weighted centroid.
    pub half_width: usize,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        VisibilityOptions { smoothing: 3, half_width: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExperiment {
    pub diffractor: RawModel,
    pub detector: RawDetector,
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub visibility: VisibilityOptions,
}

/// Validated two-stage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub diffractor: ModelConfig,
    /// Sites are the pixel centers, in the detector's own natural units.
    pub detector: ModelConfig,
    /// Detector plane in the diffractor's natural units.
    pub plane: DetectorPlane,
    pub shots: u64,
    pub seed: u64,
    pub workers: usize,
    pub grid: GridSettings,
    pub visibility: VisibilityOptions,
}

/// Builds an [`ExperimentSpec`] from configuration values.
pub fn build_experiment(raw: &RawExperiment) -> Result<ExperimentSpec> {
    let diffractor = build_model(&raw.diffractor)?;
    let dim = diffractor.dim;
    if dim < 2 {
        return Err(Error::InvalidParameter { name: "diffractor.dimension", reason: "experiments need d >= 2".into() });
    }
    if raw.shots < 1 {
        return Err(Error::InvalidParameter { name: "shots", reason: "must be at least 1".into() });
    }
    if raw.workers < 1 {
        return Err(Error::InvalidParameter { name: "workers", reason: "must be at least 1".into() });
    }
    if raw.detector.pixel_count < 2 {
        return Err(Error::InvalidParameter { name: "detector.pixel_count", reason: "need at least 2 pixels".into() });
    }
    if raw.visibility.smoothing < 1 {
        return Err(Error::InvalidParameter { name: "visibility.smoothing", reason: "must be at least 1".into() });
    }
    let d = &raw.detector;
    let spacing_input = match d.pixel_spacing {
        Some(s) => s,
        None => {
            // 4ℓ of the detector oscillator, in input length units
            let probe = detector_raw(raw, vec![vec![0.0; dim]]);
            default_pixel_spacing_lengths() * build_model(&probe)?.scale.length
        }
    };
    if !(spacing_input > 0.0) {
        return Err(Error::NonPositive("pixel spacing"));
    }
    let half = (d.pixel_count as f64 - 1.0) / 2.0;
    let sites: Vec<Vec<f64>> = (0..d.pixel_count)
        .map(|i| {
            let mut p = vec![0.0; dim];
            p[0] = d.distance;
            p[1] = (i as f64 - half) * spacing_input;
            p
        })
        .collect();
    let detector = build_model(&detector_raw(raw, sites))?;

    let l1 = diffractor.scale.length;
    let pixels = (0..d.pixel_count).map(|i| [(i as f64 - half) * spacing_input / l1, 0.0]).collect();
    let plane = DetectorPlane::new(d.distance / l1, pixels, spacing_input / l1)?;

    for (name, v) in
        [("grid.diffractor_spacing", raw.grid.diffractor_spacing), ("grid.detector_spacing", raw.grid.detector_spacing)]
    {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter { name, reason: "must be positive".into() });
        }
    }
    Ok(ExperimentSpec {
        diffractor,
        detector,
        plane,
        shots: raw.shots,
        seed: raw.seed,
        workers: raw.workers,
        grid: raw.grid,
        visibility: raw.visibility,
    })
}

fn detector_raw(raw: &RawExperiment, sites: Vec<Vec<f64>>) -> RawModel {
    let f = &raw.diffractor;
    let d = &raw.detector;
    RawModel {
        units: f.units,
        dimension: f.dimension,
        particle_mass: f.particle_mass,
        oscillator_mass: d.oscillator_mass,
        oscillator_quantum: d.oscillator_quantum,
        sites,
        potential_strength: d.potential_strength.unwrap_or(f.potential_strength),
        potential_range: d.potential_range.unwrap_or(f.potential_range),
        // the particle arrives along the beam axis with the diffractor's wavenumber
        incident: RawIncident {
            kind: IncidentKind::PlaneWave,
            wavevector: {
                let k: f64 = f.incident.wavevector.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut w = vec![0.0; f.dimension];
                w[0] = k;
                w
            },
            center: None,
            width: None,
            normalize: true,
        },
        n_max: d.n_max,
        time_window: None,
        inelastic_branching: d.inelastic_branching,
    }
}

impl ExperimentSpec {
    /// FNV-1a over every physics-relevant parameter (not seed, shots or workers).
    pub fn config_hash(&self) -> u64 {
        let text = format!("{:?}|{:?}|{:?}|{:?}", self.diffractor, self.detector, self.plane, self.grid);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Ratio of detector to diffractor oscillator lengths.
    fn length_ratio(&self) -> f64 {
        self.detector.scale.length / self.diffractor.scale.length
    }

    /// Transverse pixel positions in input length units.
    pub fn pixel_positions(&self) -> Vec<f64> {
        self.detector.sites.iter().map(|s| s[1] * self.detector.scale.length).collect()
    }
}

/// Mergeable per-site hit counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub site_counts: Vec<u64>,
    /// Shots that ended elastically (no detection).
    pub elastic: u64,
    pub shots: u64,
    pub seed: u64,
    pub config_hash: u64,
}

impl Histogram {
    pub fn empty(sites: usize, seed: u64, config_hash: u64) -> Self {
        Histogram { site_counts: vec![0; sites], elastic: 0, shots: 0, seed, config_hash }
    }

    pub fn detections(&self) -> u64 {
        self.site_counts.iter().sum()
    }

    /// Records one event; a jump lands in exactly one site.
    pub fn record(&mut self, outcome: &Outcome) {
        match outcome {
            Outcome::Elastic => self.elastic += 1,
            Outcome::Jump { site, .. } => self.site_counts[*site] += 1,
        }
        self.shots += 1;
    }

    pub fn is_consistent(&self) -> bool {
        self.detections() + self.elastic == self.shots
    }
}

/// Adds two histograms of the same configuration.
pub fn merge(h1: &Histogram, h2: &Histogram) -> Result<Histogram> {
    if h1.config_hash != h2.config_hash || h1.site_counts.len() != h2.site_counts.len() {
        return Err(Error::ConfigMismatch);
    }
    Ok(Histogram {
        site_counts: h1.site_counts.iter().zip(&h2.site_counts).map(|(a, b)| a + b).collect(),
        elastic: h1.elastic + h2.elastic,
        shots: h1.shots + h2.shots,
        seed: h1.seed,
        config_hash: h1.config_hash,
    })
}

/// Samples shots `range` from `table`, one generator stream per shot.
pub fn sample_shots(table: &ProbabilityTable, seed: u64, range: std::ops::Range<u64>, config_hash: u64) -> Histogram {
    let mut h = Histogram::empty(table.sites.len(), seed, config_hash);
    for shot in range {
        let u: f64 = shot_rng(seed, shot).random();
        h.record(&table.outcomes[table.locate(u)]);
    }
    h
}

/// Samples `shots` shots split into `workers` contiguous shards run in
/// parallel. The result does not depend on `workers`.
pub fn sample_parallel(
    table: &ProbabilityTable,
    seed: u64,
    shots: u64,
    workers: usize,
    config_hash: u64,
) -> Result<Histogram> {
    let workers = workers.max(1) as u64;
    let per = shots.div_ceil(workers);
    let shards: Vec<std::ops::Range<u64>> =
        (0..workers).map(|w| (w * per).min(shots)..((w + 1) * per).min(shots)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers as usize)
        .build()
        .map_err(|e| Error::InvalidParameter { name: "workers", reason: e.to_string() })?;
    let parts: Vec<Histogram> =
        pool.install(|| shards.into_par_iter().map(|r| sample_shots(table, seed, r, config_hash)).collect());
    let empty = Histogram::empty(table.sites.len(), seed, config_hash);
    parts.iter().try_fold(empty, |acc, h| merge(&acc, h))
}

/// One detector pixel of the deterministic first stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    /// Transverse position in input length units.
    pub position: f64,
    /// `|A|²` of the far field at the pixel center, scaled to a maximum of 1.
    pub intensity: f64,
    /// Probability that a shot is detected at this pixel.
    pub detection_probability: f64,
}

/// Everything about a run that does not depend on the random draws.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub spec: ExperimentSpec,
    pub table: ProbabilityTable,
    pub profile: Vec<ProfilePoint>,
    pub detector_field: ScalarField,
    pub elastic_wave: ScalarField,
    pub config_hash: u64,
}

/// Incident field at the detector: the far-field amplitude toward each
/// transverse column, with outgoing-wave propagation `e^{ikr}/r^{(d-1)/2}`.
fn detector_field(spec: &ExperimentSpec, source: &ScalarField) -> Result<ScalarField> {
    let det = &spec.detector;
    let grid = Grid::covering(&det.sites, det.dim, spec.grid.detector_spacing, spec.grid.margin)?;
    let ratio = spec.length_ratio();
    let k1 = source.k_out;
    let dim = det.dim;
    let counts = grid.counts().to_vec();
    let n_rows = counts[0];
    let n_cols: usize = counts[1..].iter().product();
    let distance = spec.plane.distance;
    let columns: Vec<Complex64> = (0..n_cols)
        .into_par_iter()
        .map(|c| {
            let idx = grid.multi_index(c);
            let mut r = [distance, 0.0, 0.0];
            for j in 1..dim {
                r[j] = grid.coordinate(j, idx[j]) * ratio;
            }
            let dir = direction_to(&r);
            fourier_amplitude(source, &[k1 * dir[0], k1 * dir[1], k1 * dir[2]])
        })
        .collect();
    let decay = (dim as f64 - 1.0) / 2.0;
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let col = i % n_cols;
            let p = grid.point(i);
            let r: f64 = (0..dim).map(|j| (p[j] * ratio).powi(2)).sum::<f64>().sqrt();
            columns[col] * Complex64::from_polar(r.powf(-decay), k1 * r)
        })
        .collect();
    debug_assert_eq!(values.len(), n_rows * n_cols);
    let k_det = k1 * ratio;
    Ok(ScalarField { grid, values, channel: Channel::Incident, k_out: k_det }.normalized())
}

/// Runs the deterministic first stage and builds the detector's table.
pub fn prepare(spec: &ExperimentSpec) -> Result<PreparedExperiment> {
    let diff = &spec.diffractor;
    let grid = Grid::covering(&diff.sites, diff.dim, spec.grid.diffractor_spacing, spec.grid.margin)?;
    spec.plane.check_far_field(grid.diameter())?;
    let incident = ScalarField::incident(&grid, &diff.incident);
    let elastic = elastic_source(&incident, diff);

    let field = detector_field(spec, &elastic)?;
    let weights = jump_weights(&field, &spec.detector)?;
    if weights.no_detection {
        return Err(Error::NoDetectionPossible);
    }
    let table = normalize(&weights, spec.detector.inelastic_branching)?;

    let far: Vec<f64> = (0..spec.plane.pixels.len())
        .into_par_iter()
        .map(|p| fourier_amplitude(&elastic, &spec.plane.wavevector(p, elastic.k_out)).norm_sqr())
        .collect();
    let peak = far.iter().cloned().fold(0.0, f64::max);
    let marginals = table.site_marginals();
    let profile = spec
        .pixel_positions()
        .into_iter()
        .zip(far)
        .zip(marginals)
        .map(|((position, i), p)| ProfilePoint {
            position,
            intensity: if peak > 0.0 { i / peak } else { 0.0 },
            detection_probability: p,
        })
        .collect();
    Ok(PreparedExperiment {
        spec: spec.clone(),
        table,
        profile,
        detector_field: field,
        elastic_wave: elastic,
        config_hash: spec.config_hash(),
    })
}

impl PreparedExperiment {
    pub fn run(&self) -> Result<Histogram> {
        sample_parallel(&self.table, self.spec.seed, self.spec.shots, self.spec.workers, self.config_hash)
    }

    /// Expected counts per site for `shots` shots.
    pub fn expected_counts(&self, shots: u64) -> Vec<f64> {
        self.table.site_marginals().iter().map(|p| p * shots as f64).collect()
    }
}

/// Full two-stage run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Histogram> {
    prepare(spec)?.run()
}

/// Centered moving average, truncated at the ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Fringe visibility `(max - min)/(max + min)` of the smoothed counts over
/// the central lobe (see [`VisibilityOptions`]).
pub fn visibility(h: &Histogram, opts: &VisibilityOptions) -> Result<f64> {
    let counts: Vec<f64> = h.site_counts.iter().map(|&c| c as f64).collect();
    visibility_of(&counts, opts)
}

/// [`visibility`] for real-valued (e.g. expected) counts.
pub fn visibility_of(counts: &[f64], opts: &VisibilityOptions) -> Result<f64> {
    let populated = counts.iter().filter(|&&c| c > 0.0).count();
    if populated < 2 {
        return Err(Error::TooFewSites(populated));
    }
    let total: f64 = counts.iter().sum();
    let centroid = counts.iter().enumerate().map(|(i, c)| i as f64 * c).sum::<f64>() / total;
    let center = centroid.round() as usize;
    let lo = center.saturating_sub(opts.half_width);
    let hi = (center + opts.half_width + 1).min(counts.len());
    let lobe_counts: f64 = counts[lo..hi].iter().sum();
    if lobe_counts < 100.0 {
        return Err(Error::InsufficientCounts(lobe_counts as u64));
    }
    let s = smooth(counts, opts.smoothing.max(1));
    let window = &s[lo..hi];
    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if max + min > 0.0 { (max - min) / (max + min) } else { 0.0 })
}

/// Mean spacing of the bright fringes, in pixels.
///
/// Fringe maxima are local maxima of the smoothed counts above a fifth of
/// the global maximum, refined by a parabola through their neighbours;
/// maxima closer than three pixels are merged. Returns the positions too.
pub fn fringe_period(counts: &[f64], smoothing: usize) -> Option<(f64, Vec<f64>)> {
    let s = smooth(counts, smoothing.max(1));
    let top = s.iter().cloned().fold(0.0, f64::max);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        if s[i] >= s[i - 1] && s[i] > s[i + 1] && s[i] >= 0.2 * top {
            let denom = s[i - 1] - 2.0 * s[i] + s[i + 1];
            let shift = if denom != 0.0 { 0.5 * (s[i - 1] - s[i + 1]) / denom } else { 0.0 };
            let pos = i as f64 + shift.clamp(-0.5, 0.5);
            match peaks.last_mut() {
                Some(last) if pos - last.0 < 3.0 => {
                    if s[i] > last.1 {
                        *last = (pos, s[i]);
                    }
                }
                _ => peaks.push((pos, s[i])),
            }
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    let first = peaks[0].0;
    let last = peaks[peaks.len() - 1].0;
    Some(((last - first) / (peaks.len() - 1) as f64, peaks.into_iter().map(|p| p.0).collect()))
}

/// Transverse positions (input units) of the far-field maxima of a pair of
/// emitters separated by `separation` along axis 1, for diffraction orders
/// `orders`: `sin θ_j = 2πj/(k s)`, `x_j = L tan θ_j`.
pub fn two_emitter_maxima(spec: &ExperimentSpec, separation: f64, orders: std::ops::RangeInclusive<i64>) -> Vec<f64> {
    let k = spec.diffractor.wavenumber();
    let l1 = spec.diffractor.scale.length;
    orders
        .filter_map(|j| {
            let s = 2.0 * std::f64::consts::PI * j as f64 / (k * separation);
            (s.abs() < 1.0).then(|| spec.plane.distance * s / (1.0 - s * s).sqrt() * l1)
        })
        .collect()
}

/// Total-variation distance between normalized site counts and the
/// normalized detection marginals.
pub fn total_variation(h: &Histogram, table: &ProbabilityTable) -> f64 {
    let m = table.site_marginals();
    let pm: f64 = m.iter().sum();
    let det = h.detections() as f64;
    if det == 0.0 || pm == 0.0 {
        return 1.0;
    }
    0.5 * h.site_counts.iter().zip(&m).map(|(&c, p)| (c as f64 / det - p / pm).abs()).sum::<f64>()
}
