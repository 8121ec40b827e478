//! Jump weights, outcome probabilities and single-jump sampling.
//!
//! Each incident particle ends in exactly one outcome: no energy transfer
//! (elastic), or one excitation `n ≠ 0` of one site `I` with weight
//! `P_{In} = ∫ |φ_n(x-a_I) φ_0(x-a_I) ψ_i(x)|² dᵈx`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::hermite::hermite_functions_into;
use crate::model::{
    plane_wave_pair_weight_1d, plane_wave_truncated_mass, transition_frequency, ModelConfig, MultiIndex, Point,
};
use crate::scattering::channel_open;

/// Abort threshold for dropped channel mass, relative to the inelastic mass.
pub const TAIL_LIMIT: f64 = 1e-6;
/// Tolerance on `‖ψ_i‖² = 1` accepted by [`jump_weights`].
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Tolerance on the probability sum of a [`ProbabilityTable`].
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Half width of the per-site integration window, in oscillator lengths.
/// `φ_n φ_0` is below `e^{-36}` relative outside it for every `n ≤ n_max`.
pub fn site_window(n_max: u32) -> f64 {
    6.0 + (2.0 * n_max as f64 + 1.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEntry {
    pub site: usize,
    pub n: MultiIndex,
    pub weight: f64,
    pub open: bool,
}

/// Raw (unnormalized) jump weights of one incident field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpWeightTable {
    /// Sorted by site, then lexicographically by `n`.
    pub entries: Vec<JumpEntry>,
    pub elastic_weight: f64,
    /// `‖ψ_i‖²` on the grid.
    pub incident_norm: f64,
    /// Upper bound on the weight of open channels beyond `n_max`.
    pub tail: f64,
    pub fingerprint: u64,
    pub sites: Vec<Point>,
    pub dim: usize,
    /// Every inelastic weight vanished.
    pub no_detection: bool,
}

impl JumpWeightTable {
    pub fn inelastic_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn site_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sites.len()];
        for e in &self.entries {
            out[e.site] += e.weight;
        }
        out
    }

    pub fn weight(&self, site: usize, n: &MultiIndex) -> Option<f64> {
        self.entries.iter().find(|e| e.site == site && e.n == *n).map(|e| e.weight)
    }
}

/// FNV-1a over the grid description and field values.
pub fn field_fingerprint(psi: &ScalarField) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bits: u64| {
        for b in bits.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(psi.grid.dim() as u64);
    eat(psi.grid.spacing().to_bits());
    for (o, c) in psi.grid.origin().iter().zip(psi.grid.counts()) {
        eat(o.to_bits());
        eat(*c as u64);
    }
    eat(psi.k_out.to_bits());
    for v in &psi.values {
        eat(v.re.to_bits());
        eat(v.im.to_bits());
    }
    h
}

/// Contracts `data` (shape `shape`, row-major) with a per-axis table
/// `tables[j][i][m]`, giving moments of shape `(m0, m1, m2)`.
fn contract(data: &[f64], shape: [usize; 3], tables: &[Vec<Vec<f64>>; 3]) -> (Vec<f64>, [usize; 3]) {
    let m = [tables[0][0].len(), tables[1][0].len(), tables[2][0].len()];
    // axis 2
    let mut a = vec![0.0; shape[0] * shape[1] * m[2]];
    for r in 0..shape[0] * shape[1] {
        for i2 in 0..shape[2] {
            let v = data[r * shape[2] + i2];
            if v == 0.0 {
                continue;
            }
            for (k, t) in tables[2][i2].iter().enumerate() {
                a[r * m[2] + k] += v * t;
            }
        }
    }
    // axis 1
    let mut b = vec![0.0; shape[0] * m[1] * m[2]];
    for i0 in 0..shape[0] {
        for i1 in 0..shape[1] {
            let src = &a[(i0 * shape[1] + i1) * m[2]..(i0 * shape[1] + i1 + 1) * m[2]];
            for (k1, t) in tables[1][i1].iter().enumerate() {
                let dst = &mut b[(i0 * m[1] + k1) * m[2]..(i0 * m[1] + k1 + 1) * m[2]];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += t * s;
                }
            }
        }
    }
    // axis 0
    let mut c = vec![0.0; m[0] * m[1] * m[2]];
    for i0 in 0..shape[0] {
        let src = &b[i0 * m[1] * m[2]..(i0 + 1) * m[1] * m[2]];
        for (k0, t) in tables[0][i0].iter().enumerate() {
            let dst = &mut c[k0 * m[1] * m[2]..(k0 + 1) * m[1] * m[2]];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    (c, m)
}

struct SiteResult {
    channel_weights: Vec<f64>,
    elastic: f64,
    max_density: f64,
}

fn site_weights(psi: &ScalarField, model: &ModelConfig, site: usize, channels: &[MultiIndex]) -> SiteResult {
    let grid = &psi.grid;
    let dim = grid.dim();
    let a = model.sites[site];
    let r = site_window(model.n_max);
    let ranges: Vec<std::ops::Range<usize>> =
        (0..3).map(|j| if j < dim { grid.axis_range(j, a[j] - r, a[j] + r) } else { 0..1 }).collect();
    let shape = [ranges[0].len(), ranges[1].len(), ranges[2].len()];
    if shape.contains(&0) {
        return SiteResult { channel_weights: vec![0.0; channels.len()], elastic: 0.0, max_density: 0.0 };
    }

    // per-axis (h_m h_0)² and h_0² for every site near this one
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|j| ranges[j].clone().map(|i| if j < dim { grid.coordinate(j, i) } else { 0.0 }).collect())
        .collect();
    let mut tables: [Vec<Vec<f64>>; 3] = Default::default();
    for j in 0..3 {
        tables[j] = coords[j]
            .iter()
            .map(|&x| {
                if j < dim {
                    let mut h = vec![0.0; model.n_max as usize + 1];
                    hermite_functions_into(x - a[j], &mut h);
                    let h0 = h[0];
                    h.iter().map(|v| (v * h0) * (v * h0)).collect()
                } else {
                    vec![1.0]
                }
            })
            .collect();
    }
    let neighbours: Vec<Point> =
        model.sites.iter().filter(|b| (0..dim).all(|j| (b[j] - a[j]).abs() < 2.0 * r)).copied().collect();
    let ground = |x: f64, c: f64| {
        let xi = x - c;
        crate::hermite::PI_POW_M14 * crate::hermite::PI_POW_M14 * (-xi * xi).exp()
    };

    let mut density = vec![0.0; shape[0] * shape[1] * shape[2]];
    let mut elastic = 0.0;
    let mut max_density: f64 = 0.0;
    let mut flat = 0;
    for i0 in ranges[0].clone() {
        for i1 in ranges[1].clone() {
            for i2 in ranges[2].clone() {
                let p = psi.values[grid.flat_index(&[i0, i1, i2])].norm_sqr();
                density[flat] = p;
                max_density = max_density.max(p);
                if p > 0.0 {
                    let x = [
                        grid.coordinate(0, i0),
                        if dim > 1 { grid.coordinate(1, i1) } else { 0.0 },
                        if dim > 2 { grid.coordinate(2, i2) } else { 0.0 },
                    ];
                    let own: f64 = (0..dim).map(|j| ground(x[j], a[j])).product();
                    let total: f64 =
                        neighbours.iter().map(|b| (0..dim).map(|j| ground(x[j], b[j])).product::<f64>()).sum();
                    elastic += p * own * total;
                }
                flat += 1;
            }
        }
    }

    let (moments, m) = contract(&density, shape, &tables);
    let vol = grid.cell_volume();
    let channel_weights = channels
        .iter()
        .map(|n| {
            let l = n.levels();
            let idx = (0..3).map(|j| if j < dim { l[j] as usize } else { 0 }).collect::<Vec<_>>();
            moments[(idx[0] * m[1] + idx[1]) * m[2] + idx[2]] * vol
        })
        .collect();
    SiteResult { channel_weights, elastic: elastic * vol, max_density }
}

/// Jump weights without the normalization check on `ψ_i`.
pub fn raw_jump_weights(psi: &ScalarField, model: &ModelConfig) -> Result<JumpWeightTable> {
    if psi.grid.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: psi.grid.dim() });
    }
    let mass = model.particle_mass;
    let k_in = psi.k_out;
    let channels: Vec<MultiIndex> =
        MultiIndex::all_upto(model.dim, model.n_max).into_iter().filter(|n| !n.is_zero()).collect();
    let open: Vec<bool> = channels.iter().map(|n| channel_open(k_in, n, mass)).collect();
    let open_channels: Vec<MultiIndex> = channels.iter().zip(&open).filter(|(_, o)| **o).map(|(n, _)| *n).collect();

    let per_site: Vec<SiteResult> =
        (0..model.sites.len()).into_par_iter().map(|s| site_weights(psi, model, s, &open_channels)).collect();

    let mut entries = Vec::with_capacity(model.sites.len() * channels.len());
    for (site, res) in per_site.iter().enumerate() {
        let mut w = res.channel_weights.iter();
        for (n, &is_open) in channels.iter().zip(&open) {
            let weight = if is_open { *w.next().expect("one weight per open channel") } else { 0.0 };
            entries.push(JumpEntry { site, n: *n, weight, open: is_open });
        }
    }

    let max_total = (k_in * k_in / (2.0 * mass)).floor();
    let truncated = truncated_pair_mass(model.dim, model.n_max, max_total);
    let tail: f64 = per_site.iter().map(|r| r.max_density * truncated).sum();
    let elastic_weight = per_site.iter().map(|r| r.elastic).sum();
    let no_detection = entries.iter().all(|e| e.weight <= 0.0);

    Ok(JumpWeightTable {
        entries,
        elastic_weight,
        incident_norm: psi.norm_sqr(),
        tail,
        fingerprint: field_fingerprint(psi),
        sites: model.sites.clone(),
        dim: model.dim,
        no_detection,
    })
}

/// Plane-wave pair weight of the open channels (`|n| ≤ max_total`) outside
/// the per-axis box `n ≤ n_max`. Exact for moderate totals, otherwise the
/// product bound that ignores the `|n|` constraint.
fn truncated_pair_mass(dim: usize, n_max: u32, max_total: f64) -> f64 {
    if max_total <= n_max as f64 {
        return 0.0;
    }
    if max_total <= 4096.0 {
        return plane_wave_truncated_mass(dim, n_max, max_total as u32);
    }
    let partial = |upto: u32| (0..=upto).map(plane_wave_pair_weight_1d).sum::<f64>();
    let top = (max_total.min(1e7)) as u32;
    partial(top).powi(dim as i32) - partial(n_max).powi(dim as i32)
}

/// Jump weights of a normalized incident field.
pub fn jump_weights(psi: &ScalarField, model: &ModelConfig) -> Result<JumpWeightTable> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Unnormalized(n));
    }
    raw_jump_weights(psi, model)
}

/// One possible result of an incident particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Elastic,
    Jump { site: usize, n: MultiIndex },
}

/// Normalized outcome distribution with a cumulative table for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub outcomes: Vec<Outcome>,
    pub probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    pub sites: Vec<Point>,
    pub fingerprint: u64,
}

/// Turns raw weights into outcome probabilities.
///
/// With raw elastic weight `E`, inelastic weights `W_{In}` summing to `S`
/// and branching `η`, the probabilities are `E/Z` for the elastic outcome
/// and `η W_{In}/Z` for each jump, `Z = E + ηS`. `η = 1` compares the
/// first-order norms directly; `η = 0` makes every particle elastic.
pub fn normalize(table: &JumpWeightTable, branching: f64) -> Result<ProbabilityTable> {
    if !(branching >= 0.0 && branching.is_finite()) {
        return Err(Error::InvalidParameter { name: "inelastic_branching", reason: "must be >= 0".into() });
    }
    let inelastic = table.inelastic_mass();
    if table.tail > TAIL_LIMIT * inelastic && inelastic > 0.0 {
        return Err(Error::TruncationTail { tail: table.tail / inelastic, limit: TAIL_LIMIT });
    }
    let z = table.elastic_weight + branching * inelastic;
    if !(z > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let mut outcomes = Vec::with_capacity(table.entries.len() + 1);
    let mut probabilities = Vec::with_capacity(table.entries.len() + 1);
    outcomes.push(Outcome::Elastic);
    probabilities.push(table.elastic_weight / z);
    for e in &table.entries {
        outcomes.push(Outcome::Jump { site: e.site, n: e.n });
        probabilities.push(if e.open { branching * e.weight / z } else { 0.0 });
    }
    let sum: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|p| *p /= sum);
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in &probabilities {
        acc += p;
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(ProbabilityTable {
        outcomes,
        probabilities,
        cumulative,
        sites: table.sites.clone(),
        fingerprint: table.fingerprint,
    })
}

impl ProbabilityTable {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn elastic_probability(&self) -> f64 {
        self.outcomes
            .iter()
            .zip(&self.probabilities)
            .filter(|(o, _)| matches!(o, Outcome::Elastic))
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of a jump at each site, summed over levels.
    pub fn site_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sites.len()];
        for (o, p) in self.outcomes.iter().zip(&self.probabilities) {
            if let Outcome::Jump { site, .. } = o {
                out[*site] += p;
            }
        }
        out
    }

    pub fn probability(&self, outcome: &Outcome) -> f64 {
        self.outcomes.iter().zip(&self.probabilities).filter(|(o, _)| *o == outcome).map(|(_, p)| p).sum()
    }

    /// Outcome index for a uniform draw `u ∈ [0, 1)`.
    pub fn locate(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.outcomes.len() - 1)
    }

    /// Builds a table from explicit probabilities, for tests and tools.
    pub fn from_probabilities(outcomes: Vec<Outcome>, probabilities: Vec<f64>, sites: Vec<Point>) -> Result<Self> {
        if outcomes.len() != probabilities.len() || outcomes.is_empty() {
            return Err(Error::InvalidParameter { name: "probabilities", reason: "length mismatch".into() });
        }
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for &p in &probabilities {
            if !(p >= 0.0) {
                return Err(Error::InvalidParameter { name: "probabilities", reason: "negative entry".into() });
            }
            acc += p;
            cumulative.push(acc);
        }
        Ok(ProbabilityTable { outcomes, probabilities, cumulative, sites, fingerprint: 0 })
    }
}

/// Outcome of one incident particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub outcome: Outcome,
    /// `ħω_{n,0}` in units of `ħΩ` (zero when elastic).
    pub deposited_energy: f64,
    pub site_position: Option<Point>,
    pub seed: u64,
    pub stream: u64,
}

/// Generator for shot `stream` of a run seeded with `seed`. Independent of
/// how shots are scheduled across workers.
pub fn shot_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws exactly one outcome.
pub fn sample_jump(table: &ProbabilityTable, seed: u64, stream: u64) -> Result<DetectionEvent> {
    let total = table.total();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::UnnormalizedTable(total));
    }
    let u: f64 = shot_rng(seed, stream).random();
    Ok(event_for(table, table.locate(u), seed, stream))
}

pub(crate) fn event_for(table: &ProbabilityTable, index: usize, seed: u64, stream: u64) -> DetectionEvent {
    let outcome = table.outcomes[index];
    let (deposited_energy, site_position) = match outcome {
        Outcome::Elastic => (0.0, None),
        Outcome::Jump { site, n } => (transition_frequency(&n), Some(table.sites[site])),
    };
    DetectionEvent { outcome, deposited_energy, site_position, seed, stream }
}

/// The `(site, n)` with the largest raw weight; ties go to the lowest site,
/// then the lexicographically smallest `n`.
pub fn argmax_jump(table: &JumpWeightTable) -> Result<(usize, MultiIndex)> {
    let mut best: Option<&JumpEntry> = None;
    for e in &table.entries {
        if e.weight > 0.0 && best.iter().all(|b| e.weight > b.weight) {
            best = Some(e);
        }
    }
    best.map(|e| (e.site, e.n)).ok_or(Error::AllWeightsZero)
}

/// Line-delimited event log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub shot: u64,
    pub outcome: String,
    pub site: Option<usize>,
    pub level: u32,
    pub deposited_energy: f64,
    pub stream: u64,
}

impl DetectionEvent {
    pub fn record(&self, shot: u64) -> EventRecord {
        let (outcome, site, level) = match self.outcome {
            Outcome::Elastic => ("elastic".to_string(), None, 0),
            Outcome::Jump { site, n } => ("jump".to_string(), Some(site), n.total()),
        };
        EventRecord { shot, outcome, site, level, deposited_energy: self.deposited_energy, stream: self.stream }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_way() -> ProbabilityTable {
        let sites = vec![[0.0; 3], [4.0, 0.0, 0.0]];
        ProbabilityTable::from_probabilities(
            vec![
                Outcome::Elastic,
                Outcome::Jump { site: 0, n: MultiIndex::new(&[1]) },
                Outcome::Jump { site: 1, n: MultiIndex::new(&[1]) },
            ],
            vec![0.5, 0.3, 0.2],
            sites,
        )
        .unwrap()
    }

    #[test]
    fn locate_skips_zero_width_outcomes() {
        let t = ProbabilityTable::from_probabilities(
            vec![Outcome::Elastic, Outcome::Elastic, Outcome::Elastic],
            vec![0.0, 1.0, 0.0],
            vec![],
        )
        .unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(t.locate(u), 1);
        }
    }

    #[test]
    fn degenerate_table_is_always_elastic() {
        let t = ProbabilityTable::from_probabilities(
            vec![Outcome::Elastic, Outcome::Jump { site: 0, n: MultiIndex::new(&[2]) }],
            vec![1.0, 0.0],
            vec![[0.0; 3]],
        )
        .unwrap();
        for s in 0..1000 {
            assert_eq!(sample_jump(&t, 11, s).unwrap().outcome, Outcome::Elastic);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = three_way();
        for s in 0..50 {
            assert_eq!(sample_jump(&t, 7, s).unwrap(), sample_jump(&t, 7, s).unwrap());
        }
    }

    #[test]
    fn unnormalized_table_is_rejected() {
        let t = ProbabilityTable::from_probabilities(vec![Outcome::Elastic], vec![0.5], vec![]).unwrap();
        assert!(matches!(sample_jump(&t, 1, 1), Err(Error::UnnormalizedTable(_))));
    }

    #[test]
    fn event_energy_matches_level() {
        let t = three_way();
        let e = event_for(&t, 2, 3, 4);
        assert_eq!(e.deposited_energy, 1.0);
        assert_eq!(e.site_position, Some([4.0, 0.0, 0.0]));
        assert_eq!(e.record(9).site, Some(1));
    }

    #[test]
    fn contraction_matches_direct_sum() {
        let shape = [3, 4, 2];
        let data: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let tab = |len: usize, m: usize, s: f64| -> Vec<Vec<f64>> {
            (0..len).map(|i| (0..m).map(|k| ((i * 7 + k) as f64 * s).cos()).collect()).collect()
        };
        let tables = [tab(3, 2, 0.3), tab(4, 3, 0.5), tab(2, 2, 0.9)];
        let (c, m) = contract(&data, shape, &tables);
        for k0 in 0..m[0] {
            for k1 in 0..m[1] {
                for k2 in 0..m[2] {
                    let mut direct = 0.0;
                    for i0 in 0..3 {
                        for i1 in 0..4 {
                            for i2 in 0..2 {
                                direct += data[(i0 * 4 + i1) * 2 + i2]
                                    * tables[0][i0][k0]
                                    * tables[1][i1][k1]
                                    * tables[2][i2][k2];
                            }
                        }
                    }
                    assert!((c[(k0 * m[1] + k1) * m[2] + k2] - direct).abs() < 1e-13);
                }
            }
        }
    }
}
