//! Physical parameters, unit scaling and single-oscillator quantities.
//!
//! Everything downstream of [`build_model`] works in natural units:
//! `ħ = 1`, `Ω = 1` and lengths in the oscillator length `ℓ = √(ħ/MΩ)`,
//! which makes the oscillator mass `M = 1` as well. [`UnitScale`] keeps the
//! factors needed to express results in the units of the input.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::hermite_function;

/// A position or wavevector; only the first `dim` components are used.
pub type Point = [f64; 3];

/// ħ in eV·fs.
pub const HBAR_EV_FS: f64 = 0.658_211_956_9;
/// Speed of light in nm/fs.
pub const C_NM_PER_FS: f64 = 299.792_458;

/// Unit system of the raw input parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    /// `ħ = 1`; masses, energies and lengths in any consistent units.
    #[default]
    Natural,
    /// Lengths in nm, energies in eV, times in fs, masses as rest energies in eV.
    EvNmFs,
}

impl UnitSystem {
    pub fn hbar(self) -> f64 {
        match self {
            UnitSystem::Natural => 1.0,
            UnitSystem::EvNmFs => HBAR_EV_FS,
        }
    }

    /// Converts an input mass value into a mass consistent with [`Self::hbar`].
    fn mass(self, value: f64) -> f64 {
        match self {
            UnitSystem::Natural => value,
            UnitSystem::EvNmFs => value / (C_NM_PER_FS * C_NM_PER_FS),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    PlaneWave,
    Gaussian,
}

/// Incident wave as written in a configuration file (input units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIncident {
    pub kind: IncidentKind,
    pub wavevector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}
fn default_n_max() -> u32 {
    8
}
fn default_branching() -> f64 {
    1.0
}

/// Model parameters as written in a configuration file (input units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    #[serde(default)]
    pub units: UnitSystem,
    pub dimension: usize,
    pub particle_mass: f64,
    pub oscillator_mass: f64,
    /// Oscillator level spacing `ħΩ` (energy).
    pub oscillator_quantum: f64,
    pub sites: Vec<Vec<f64>>,
    pub potential_strength: f64,
    pub potential_range: f64,
    pub incident: RawIncident,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_window: Option<f64>,
    /// Relative weight of the inelastic block against the elastic weight.
    #[serde(default = "default_branching")]
    pub inelastic_branching: f64,
}

/// Conversion factors between natural and input units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub system: UnitSystem,
    /// Oscillator mass in input mass units.
    pub mass: f64,
    /// Oscillator length `ℓ` in input length units.
    pub length: f64,
    /// `1/Ω` in input time units.
    pub time: f64,
    /// `ħΩ` in input energy units.
    pub energy: f64,
}

impl UnitScale {
    pub fn identity() -> Self {
        UnitScale { system: UnitSystem::Natural, mass: 1.0, length: 1.0, time: 1.0, energy: 1.0 }
    }
}

/// Incident wave in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IncidentWave {
    PlaneWave {
        k: Point,
        normalize: bool,
    },
    /// `ψ ∝ exp(-|x-c|²/4w²) e^{ik·x}`, so `|ψ|²` has standard deviation `w` per axis.
    Gaussian {
        k: Point,
        center: Point,
        width: f64,
        normalize: bool,
    },
}

impl IncidentWave {
    pub fn wavevector(&self) -> Point {
        match self {
            IncidentWave::PlaneWave { k, .. } | IncidentWave::Gaussian { k, .. } => *k,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        norm(&self.wavevector())
    }

    pub fn normalized(&self) -> bool {
        match self {
            IncidentWave::PlaneWave { normalize, .. } | IncidentWave::Gaussian { normalize, .. } => *normalize,
        }
    }

    /// Unnormalized amplitude at `x`.
    pub fn amplitude(&self, x: &Point) -> Complex64 {
        match self {
            IncidentWave::PlaneWave { k, .. } => Complex64::from_polar(1.0, dot(k, x)),
            IncidentWave::Gaussian { k, center, width, .. } => {
                let r2: f64 = (0..3).map(|j| (x[j] - center[j]).powi(2)).sum();
                Complex64::from_polar((-r2 / (4.0 * width * width)).exp(), dot(k, x))
            }
        }
    }
}

/// Validated model in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    /// `m/M`.
    pub particle_mass: f64,
    pub sites: Vec<Point>,
    pub potential_strength: f64,
    pub potential_range: f64,
    pub incident: IncidentWave,
    pub n_max: u32,
    pub time_window: Option<f64>,
    pub inelastic_branching: f64,
    pub scale: UnitScale,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive(name))
    }
}

fn to_point(v: &[f64], dim: usize, scale: f64) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    let mut p = [0.0; 3];
    for (dst, src) in p.iter_mut().zip(v) {
        if !src.is_finite() {
            return Err(Error::InvalidParameter { name: "coordinate", reason: "not finite".into() });
        }
        *dst = src * scale;
    }
    Ok(p)
}

/// Validates raw parameters and converts them to natural units.
pub fn build_model(raw: &RawModel) -> Result<ModelConfig> {
    let dim = raw.dimension;
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter { name: "dimension", reason: format!("must be 1, 2 or 3, got {dim}") });
    }
    positive("particle mass", raw.particle_mass)?;
    positive("oscillator mass", raw.oscillator_mass)?;
    positive("frequency", raw.oscillator_quantum)?;
    positive("potential range", raw.potential_range)?;
    if !raw.potential_strength.is_finite() {
        return Err(Error::InvalidParameter { name: "potential_strength", reason: "not finite".into() });
    }
    if raw.n_max < 1 {
        return Err(Error::InvalidParameter { name: "n_max", reason: "must be at least 1".into() });
    }
    if !(raw.inelastic_branching >= 0.0 && raw.inelastic_branching.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "inelastic_branching",
            reason: "must be finite and non-negative".into(),
        });
    }
    if raw.sites.is_empty() {
        return Err(Error::EmptySites);
    }

    let hbar = raw.units.hbar();
    let big_m = raw.units.mass(raw.oscillator_mass);
    let omega = raw.oscillator_quantum / hbar;
    let length = (hbar / (big_m * omega)).sqrt();
    let scale = UnitScale {
        system: raw.units,
        mass: raw.oscillator_mass,
        length,
        time: 1.0 / omega,
        energy: raw.oscillator_quantum,
    };

    let sites = raw.sites.iter().map(|s| to_point(s, dim, 1.0 / length)).collect::<Result<Vec<_>>>()?;
    for i in 0..sites.len() {
        for j in 0..i {
            if sites[i] == sites[j] {
                return Err(Error::DuplicateSite { first: j, second: i });
            }
        }
    }

    let k = to_point(&raw.incident.wavevector, dim, length)?;
    if norm(&k) <= 0.0 {
        return Err(Error::NonPositive("wavenumber"));
    }
    let incident = match raw.incident.kind {
        IncidentKind::PlaneWave => IncidentWave::PlaneWave { k, normalize: raw.incident.normalize },
        IncidentKind::Gaussian => {
            let center = raw.incident.center.as_deref().ok_or(Error::InvalidParameter {
                name: "incident.center",
                reason: "required for a gaussian packet".into(),
            })?;
            let width = raw.incident.width.ok_or(Error::InvalidParameter {
                name: "incident.width",
                reason: "required for a gaussian packet".into(),
            })?;
            positive("packet width", width)?;
            IncidentWave::Gaussian {
                k,
                center: to_point(center, dim, 1.0 / length)?,
                width: width / length,
                normalize: raw.incident.normalize,
            }
        }
    };

    let time_window = match raw.time_window {
        Some(t) => {
            positive("time window", t)?;
            Some(t / scale.time)
        }
        None => None,
    };

    Ok(ModelConfig {
        dim,
        particle_mass: raw.particle_mass / raw.oscillator_mass,
        sites,
        potential_strength: raw.potential_strength / (raw.oscillator_quantum * length.powi(dim as i32)),
        potential_range: raw.potential_range / length,
        incident,
        n_max: raw.n_max,
        time_window,
        inelastic_branching: raw.inelastic_branching,
        scale,
    })
}

impl ModelConfig {
    /// Re-expresses the model in the units it was given in.
    pub fn to_raw(&self) -> RawModel {
        let s = &self.scale;
        let lengths = |p: &Point, f: f64| p[..self.dim].iter().map(|v| v * f).collect::<Vec<_>>();
        let incident = match &self.incident {
            IncidentWave::PlaneWave { k, normalize } => RawIncident {
                kind: IncidentKind::PlaneWave,
                wavevector: lengths(k, 1.0 / s.length),
                center: None,
                width: None,
                normalize: *normalize,
            },
            IncidentWave::Gaussian { k, center, width, normalize } => RawIncident {
                kind: IncidentKind::Gaussian,
                wavevector: lengths(k, 1.0 / s.length),
                center: Some(lengths(center, s.length)),
                width: Some(width * s.length),
                normalize: *normalize,
            },
        };
        RawModel {
            units: s.system,
            dimension: self.dim,
            particle_mass: self.particle_mass * s.mass,
            oscillator_mass: s.mass,
            oscillator_quantum: s.energy,
            sites: self.sites.iter().map(|p| lengths(p, s.length)).collect(),
            potential_strength: self.potential_strength * s.energy * s.length.powi(self.dim as i32),
            potential_range: self.potential_range * s.length,
            incident,
            n_max: self.n_max,
            time_window: self.time_window.map(|t| t * s.time),
            inelastic_branching: self.inelastic_branching,
        }
    }

    pub fn basis(&self) -> OscillatorBasis {
        OscillatorBasis::new(self.dim, self.n_max)
    }

    pub fn wavenumber(&self) -> f64 {
        self.incident.wavenumber()
    }

    /// Incident kinetic energy `k²/2m` in units of `ħΩ`.
    pub fn kinetic_energy(&self) -> f64 {
        let k = self.wavenumber();
        k * k / (2.0 * self.particle_mass)
    }
}

/// Oscillator excitation levels, one per axis.
///
/// Ordering is lexicographic in the levels, which is the tie-break order
/// used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    levels: [u32; 3],
    dim: u8,
}

impl MultiIndex {
    pub fn new(levels: &[u32]) -> Self {
        assert!((1..=3).contains(&levels.len()), "multi-index needs 1 to 3 components");
        let mut l = [0; 3];
        l[..levels.len()].copy_from_slice(levels);
        MultiIndex { levels: l, dim: levels.len() as u8 }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&[0, 0, 0][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels[..self.dim as usize]
    }

    /// `|n| = Σ n_i`.
    pub fn total(&self) -> u32 {
        self.levels().iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    pub fn max_level(&self) -> u32 {
        self.levels().iter().copied().max().unwrap_or(0)
    }

    /// Every index with components in `0..=n_max`, in lexicographic order.
    pub fn all_upto(dim: usize, n_max: u32) -> Vec<MultiIndex> {
        let side = n_max as usize + 1;
        let count = side.pow(dim as u32);
        (0..count)
            .map(|mut c| {
                let mut l = [0u32; 3];
                for j in (0..dim).rev() {
                    l[j] = (c % side) as u32;
                    c /= side;
                }
                MultiIndex::new(&l[..dim])
            })
            .collect()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.levels().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// Level structure of one oscillator in natural units (`ħ = Ω = ℓ = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorBasis {
    pub dim: usize,
    pub n_max: u32,
}

impl OscillatorBasis {
    pub fn new(dim: usize, n_max: u32) -> Self {
        OscillatorBasis { dim, n_max }
    }

    /// `E_n = |n| + d/2`.
    pub fn energy(&self, n: &MultiIndex) -> f64 {
        n.total() as f64 + self.dim as f64 / 2.0
    }

    pub fn hermite_fn(&self, n: u32, xi: f64) -> Result<f64> {
        if n > self.n_max {
            return Err(Error::LevelOutOfRange { n, n_max: self.n_max });
        }
        Ok(hermite_function(n, xi))
    }
}

/// `ω_{n,0} = (E_n - E_0)/ħ`, i.e. `|n|` in units of `Ω`.
pub fn transition_frequency(n: &MultiIndex) -> f64 {
    n.total() as f64
}

/// Transition density `φ_n(x-a) φ_0(x-a)`.
pub fn pair_density(n: &MultiIndex, x: &Point, a: &Point) -> f64 {
    n.levels()
        .iter()
        .enumerate()
        .map(|(j, &nj)| {
            let xi = x[j] - a[j];
            hermite_function(nj, xi) * hermite_function(0, xi)
        })
        .product()
}

/// `∫ dᵈy e^{iq·y} φ_n(y) φ_0(y)` in closed form.
pub fn plane_wave_form_factor(n: &MultiIndex, q: &Point) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    for (j, &nj) in n.levels().iter().enumerate() {
        let z = Complex64::new(0.0, q[j] / std::f64::consts::SQRT_2);
        let mut term = Complex64::new((-q[j] * q[j] / 4.0).exp(), 0.0);
        for k in 1..=nj {
            term *= z / (k as f64).sqrt();
        }
        out *= term;
    }
    out
}

/// `|⟨n|e^{iq·y}|0⟩|²`, a product of Poisson weights with mean `q_j²/2`.
pub fn poisson_weight(n: &MultiIndex, q: &Point) -> f64 {
    plane_wave_form_factor(n, q).norm_sqr()
}

/// `∫ dᵈx |φ_n φ_0|²` for one axis: `Γ(n+½)/(√2 π n!)`.
///
/// This is the momentum average of the Poisson weight `e^{-η}ηⁿ/n!`,
/// `η = q²/2`, and is the jump weight per unit incident density for a
/// plane wave.
pub fn plane_wave_pair_weight_1d(n: u32) -> f64 {
    let mut c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for k in 1..=n {
        c *= (k as f64 - 0.5) / k as f64;
    }
    c
}

pub fn plane_wave_pair_weight(n: &MultiIndex) -> f64 {
    n.levels().iter().map(|&nj| plane_wave_pair_weight_1d(nj)).product()
}

/// Total plane-wave pair weight of all channels with `|n| <= max_total`
/// that have some component above `n_max`, i.e. the mass a per-axis
/// truncation at `n_max` drops.
pub fn plane_wave_truncated_mass(dim: usize, n_max: u32, max_total: u32) -> f64 {
    // distributions over the running total |n|, split by whether any
    // component so far exceeded n_max
    let k = max_total as usize;
    let mut inside = vec![0.0; k + 1];
    let mut outside = vec![0.0; k + 1];
    inside[0] = 1.0;
    for _ in 0..dim {
        let mut ni = vec![0.0; k + 1];
        let mut no = vec![0.0; k + 1];
        for t in 0..=k {
            if inside[t] == 0.0 && outside[t] == 0.0 {
                continue;
            }
            for n in 0..=(k - t) {
                let c = plane_wave_pair_weight_1d(n as u32);
                if n as u32 <= n_max {
                    ni[t + n] += inside[t] * c;
                    no[t + n] += outside[t] * c;
                } else {
                    no[t + n] += (inside[t] + outside[t]) * c;
                }
            }
        }
        inside = ni;
        outside = no;
    }
    outside.iter().sum()
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}
