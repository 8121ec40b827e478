use proptest::prelude::*;
use qjump_core::experiment::*;
use qjump_core::model::{IncidentKind, RawIncident, RawModel, UnitSystem};
use qjump_core::Error;

fn raw(sites: Vec<Vec<f64>>, shots: u64, workers: usize) -> RawExperiment {
    RawExperiment {
        diffractor: RawModel {
            units: UnitSystem::Natural,
            dimension: 2,
            particle_mass: 1.0,
            oscillator_mass: 1.0,
            oscillator_quantum: 1.0,
            sites,
            potential_strength: 1.0,
            potential_range: 0.05,
            incident: RawIncident {
                kind: IncidentKind::PlaneWave,
                wavevector: vec![4.0, 0.0],
                center: None,
                width: None,
                normalize: true,
            },
            n_max: 8,
            time_window: None,
            inelastic_branching: 1.0,
        },
        detector: RawDetector {
            oscillator_mass: 0.005314,
            oscillator_quantum: 1.25,
            distance: 4000.0,
            pixel_count: 61,
            pixel_spacing: None,
            n_max: 8,
            inelastic_branching: 1.0,
            potential_strength: None,
            potential_range: None,
        },
        shots,
        seed: 11,
        workers,
        grid: GridSettings::default(),
        visibility: VisibilityOptions::default(),
    }
}

fn two_sites() -> Vec<Vec<f64>> {
    vec![vec![0.0, -8.0], vec![0.0, 8.0]]
}

#[test]
fn sharded_runs_equal_serial_runs() {
    let serial = run_experiment(&build_experiment(&raw(two_sites(), 10_000, 1)).unwrap()).unwrap();
    let sharded = run_experiment(&build_experiment(&raw(two_sites(), 10_000, 4)).unwrap()).unwrap();
    assert_eq!(serial, sharded);
    assert!(serial.is_consistent());
    assert_eq!(serial.shots, 10_000);
}

#[test]
fn single_shot_gives_one_count() {
    let h = run_experiment(&build_experiment(&raw(two_sites(), 1, 1)).unwrap()).unwrap();
    assert_eq!(h.detections() + h.elastic, 1);
}

#[test]
fn histogram_follows_detection_marginals() {
    let spec = build_experiment(&raw(two_sites(), 1_000_000, 4)).unwrap();
    let prep = prepare(&spec).unwrap();
    let h = prep.run().unwrap();
    assert!(total_variation(&h, &prep.table) < 5e-3);
}

#[test]
fn detection_probabilities_follow_far_field_intensity() {
    // the detector oscillators are small compared with the fringe period,
    // so the detection marginals track the arrival density
    let spec = build_experiment(&raw(two_sites(), 1, 1)).unwrap();
    let prep = prepare(&spec).unwrap();
    let pm: f64 = prep.profile.iter().map(|p| p.detection_probability).sum();
    let im: f64 = prep.profile.iter().map(|p| p.intensity).sum();
    let tv: f64 =
        prep.profile.iter().map(|p| (p.detection_probability / pm - p.intensity / im).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn single_emitter_has_no_fringes() {
    let spec = build_experiment(&raw(vec![vec![0.0, 0.0]], 100_000, 2)).unwrap();
    let prep = prepare(&spec).unwrap();
    let expected = prep.expected_counts(100_000);
    let c = expected.len() / 2;
    assert!(expected[..=c].windows(2).all(|w| w[1] >= w[0]));
    assert!(expected[c..].windows(2).all(|w| w[1] <= w[0]));
    let h = prep.run().unwrap();
    assert!(visibility(&h, &spec.visibility).unwrap() < 0.05);
}

#[test]
fn rejects_near_detector_and_closed_channels() {
    let mut near = raw(two_sites(), 10, 1);
    near.detector.distance = 100.0;
    let spec = build_experiment(&near).unwrap();
    assert!(matches!(prepare(&spec), Err(Error::FraunhoferViolated { .. })));

    let mut closed = raw(two_sites(), 10, 1);
    // ħΩ₂ above the kinetic energy of 8 closes every detector channel
    closed.detector.oscillator_quantum = 9.0;
    let spec = build_experiment(&closed).unwrap();
    assert!(matches!(prepare(&spec), Err(Error::NoDetectionPossible)));
}

#[test]
fn merge_rejects_other_configurations() {
    let a = Histogram::empty(3, 1, 10);
    let b = Histogram::empty(4, 1, 10);
    let c = Histogram::empty(3, 1, 11);
    assert_eq!(merge(&a, &b), Err(Error::ConfigMismatch));
    assert_eq!(merge(&a, &c), Err(Error::ConfigMismatch));
}

fn histogram() -> impl Strategy<Value = Histogram> {
    (prop::collection::vec(0u64..1000, 5), 0u64..1000).prop_map(|(counts, elastic)| {
        let mut h = Histogram::empty(5, 3, 77);
        h.shots = counts.iter().sum::<u64>() + elastic;
        h.site_counts = counts;
        h.elastic = elastic;
        h
    })
}

proptest! {
    #[test]
    fn merge_is_associative_and_commutative(a in histogram(), b in histogram(), c in histogram()) {
        let ab_c = merge(&merge(&a, &b).unwrap(), &c).unwrap();
        let a_bc = merge(&a, &merge(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(&ab_c, &a_bc);
        prop_assert_eq!(merge(&a, &b).unwrap(), merge(&b, &a).unwrap());
        prop_assert!(ab_c.is_consistent());
        prop_assert_eq!(merge(&a, &Histogram::empty(5, 3, 77)).unwrap(), a);
    }

    #[test]
    fn visibility_is_scale_invariant(counts in prop::collection::vec(1.0f64..500.0, 12..40), factor in 1.0f64..50.0) {
        let opts = VisibilityOptions::default();
        let scaled: Vec<f64> = counts.iter().map(|c| c * factor).collect();
        match (visibility_of(&counts, &opts), visibility_of(&scaled, &opts)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            (Err(_), _) => {}
            (Ok(_), Err(e)) => prop_assert!(false, "scaling up lost counts: {e}"),
        }
    }
}
