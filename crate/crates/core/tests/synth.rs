use std::fs;

use demonsonar_core::eval::read_manifest;
use demonsonar_core::synth::{generate_dataset, synth_vessel_signal, vessel_components, SynthSpec, VesselParams};
use demonsonar_core::SampleBuffer;

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[test]
fn measured_snr_matches_request() {
    for (snr_db, seed) in [(-5.0, 1), (0.0, 2), (10.0, 3), (20.0, 4)] {
        let p = VesselParams {
            snr_db,
            seed,
            duration_s: 2.0,
            ..VesselParams::default()
        };
        let (signal, noise) = vessel_components(&p).unwrap();
        let measured = 10.0 * (power(&signal) / power(&noise)).log10();
        assert!((measured - snr_db).abs() <= 0.5, "{snr_db} dB requested, {measured} measured");
    }
}

#[test]
fn same_seed_same_buffer_and_distinct_seeds_differ() {
    let p = VesselParams {
        duration_s: 1.0,
        ..VesselParams::default()
    };
    let a = synth_vessel_signal(&p).unwrap();
    assert_eq!(a, synth_vessel_signal(&p).unwrap());
    let b = synth_vessel_signal(&VesselParams { seed: 1, ..p }).unwrap();
    assert!(a.samples()[..100].iter().zip(&b.samples()[..100]).all(|(x, y)| x != y));
}

#[test]
fn peak_is_normalized() {
    let buf: SampleBuffer = synth_vessel_signal(&VesselParams {
        duration_s: 1.0,
        seed: 6,
        ..VesselParams::default()
    })
    .unwrap();
    let peak = buf.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((peak - 0.9).abs() < 1e-12);
}

#[test]
fn dataset_counts_labels_and_regeneration() {
    let spec = SynthSpec {
        samples_per_class: 10,
        duration_s: 1.0,
        seed: 42,
        ..SynthSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let m = generate_dataset(&spec, &a).unwrap();
    assert_eq!(m.len(), 50);
    for c in 0..5 {
        assert_eq!(m.rows.iter().filter(|r| r.coarse == c).count(), 10);
    }
    assert!(m.rows.iter().all(|r| r.fine.is_some() == (r.coarse == 1)));

    let m2 = generate_dataset(&spec, &b).unwrap();
    assert_eq!(m, m2);
    assert_eq!(read_manifest(&a.join("manifest.csv")).unwrap(), m);
    assert_eq!(fs::read(a.join("manifest.csv")).unwrap(), fs::read(b.join("manifest.csv")).unwrap());
    for r in &m.rows {
        assert_eq!(fs::read(a.join(&r.path)).unwrap(), fs::read(b.join(&r.path)).unwrap(), "{}", r.path);
    }
}

#[test]
fn unwritable_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("f");
    fs::write(&blocker, "").unwrap();
    let spec = SynthSpec {
        samples_per_class: 2,
        duration_s: 0.5,
        ..SynthSpec::default()
    };
    let err = generate_dataset(&spec, &blocker.join("x")).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains(blocker.to_str().unwrap()));
}
