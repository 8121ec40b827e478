use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qjump_core::experiment::sample_parallel;
use qjump_core::field::{Grid, ScalarField, DEFAULT_MARGIN};
use qjump_core::jumps::{jump_weights, normalize};
use qjump_core::model::{build_model, IncidentKind, ModelConfig, RawIncident, RawModel, UnitSystem};
use qjump_core::oracle::{evolve, max_time_step, CoupledState, OracleGrid};
use qjump_core::scattering::{elastic_source, far_field, DetectorPlane};

fn model(dim: usize, sites: Vec<Vec<f64>>, incident: RawIncident, g: f64, sigma: f64, n_max: u32) -> ModelConfig {
    build_model(&RawModel {
        units: UnitSystem::Natural,
        dimension: dim,
        particle_mass: 1.0,
        oscillator_mass: 1.0,
        oscillator_quantum: 1.0,
        sites,
        potential_strength: g,
        potential_range: sigma,
        incident,
        n_max,
        time_window: None,
        inelastic_branching: 1.0,
    })
    .unwrap()
}

fn two_site() -> (ModelConfig, ScalarField) {
    let incident = RawIncident {
        kind: IncidentKind::PlaneWave,
        wavevector: vec![4.0, 0.0],
        center: None,
        width: None,
        normalize: true,
    };
    let m = model(2, vec![vec![0.0, -8.0], vec![0.0, 8.0]], incident, 1.0, 0.05, 8);
    let grid = Grid::covering(&m.sites, 2, 0.25, DEFAULT_MARGIN).unwrap();
    let psi = ScalarField::incident(&grid, &m.incident);
    (m, psi)
}

fn weights(c: &mut Criterion) {
    let (m, psi) = two_site();
    c.bench_function("jump_weights two sites 2d", |b| b.iter(|| jump_weights(black_box(&psi), &m).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let (m, psi) = two_site();
    let table = normalize(&jump_weights(&psi, &m).unwrap(), 1.0).unwrap();
    c.bench_function("sample 1e5 shots", |b| b.iter(|| sample_parallel(&table, black_box(7), 100_000, 1, 0).unwrap()));
}

fn far(c: &mut Criterion) {
    let (m, psi) = two_site();
    let source = elastic_source(&psi, &m);
    let plane = DetectorPlane::line(4000.0, 101, 49.0).unwrap();
    c.bench_function("far field 101 pixels", |b| b.iter(|| far_field(black_box(&source), &plane).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let incident = RawIncident {
        kind: IncidentKind::Gaussian,
        wavevector: vec![1.6],
        center: Some(vec![-25.0]),
        width: Some(3.0),
        normalize: true,
    };
    let m = model(1, vec![vec![0.0]], incident, 0.01, 0.3, 4);
    let grid = OracleGrid::default();
    let start = CoupledState::initial(&m, &grid).unwrap();
    let dt = max_time_step(&m, grid.spacing);
    c.bench_function("oracle 100 steps", |b| b.iter(|| evolve(black_box(start.clone()), &m, 100.0 * dt, dt).unwrap()));
}

criterion_group!(benches, weights, sampling, far, oracle);
criterion_main!(benches);
