mod common;

use nalgebra::DMatrix;
use rand::Rng;
use zood::io::{
    load_fixture, read_bundle, read_manifest, write_bundle, write_manifest, FeatureBundle,
    IoError, ManifestEntry, ZooManifest, FIXTURE_DATASETS,
};

fn random_bundle(seed: u64, n: usize, d: usize, id: &str) -> FeatureBundle {
    let mut rng = common::rng(seed);
    let features = common::gaussian_matrix(&mut rng, n, d);
    let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
    let domains = (0..n).map(|_| rng.random_range(0..4)).collect();
    FeatureBundle {
        model_id: id.to_string(),
        features,
        labels,
        domains,
        column_provenance: None,
    }
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(51, 100, 16, "roundtrip");
    let path = dir.path().join("roundtrip.zood");
    write_bundle(&bundle, &path).unwrap();
    let back = read_bundle(&path).unwrap();
    assert_eq!(back.model_id, "roundtrip");
    assert_eq!(back.labels, bundle.labels);
    assert_eq!(back.domains, bundle.domains);
    assert_eq!(back.features.nrows(), 100);
    for (a, b) in back.features.iter().zip(bundle.features.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn large_binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(52, 1000, 1000, "large");
    let path = dir.path().join("large.zood");
    write_bundle(&bundle, &path).unwrap();
    let back = read_bundle(&path).unwrap();
    for (a, b) in back.features.iter().zip(bundle.features.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn hand_written_csv_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.csv");
    std::fs::write(&path, "domain,label,f0,f1\n0,1,0.5,-1.25\n1,0,2.0,3.5\n0,1,0.0,1e-3\n")
        .unwrap();
    let bundle = read_bundle(&path).unwrap();
    assert_eq!(bundle.model_id, "tiny");
    assert_eq!(bundle.labels, vec![1, 0, 1]);
    assert_eq!(bundle.domains, vec![0, 1, 0]);
    let want = DMatrix::from_row_slice(3, 2, &[0.5, -1.25, 2.0, 3.5, 0.0, 1e-3]);
    assert_eq!(bundle.features, want);
}

#[test]
fn truncated_binary_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(53, 20, 4, "cut");
    let path = dir.path().join("cut.zood");
    write_bundle(&bundle, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    let err = read_bundle(&path).unwrap_err();
    assert!(matches!(err, IoError::TruncatedFile), "got {err}");
}

#[test]
fn garbage_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.bin");
    std::fs::write(&path, b"NOPE everything else").unwrap();
    assert!(matches!(read_bundle(&path).unwrap_err(), IoError::BadMagic));
}

#[test]
fn future_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(54, 5, 2, "ver");
    let path = dir.path().join("ver.zood");
    write_bundle(&bundle, &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4] = 2;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        read_bundle(&path).unwrap_err(),
        IoError::VersionUnsupported(2)
    ));
}

#[test]
fn out_of_range_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(55, 8, 2, "range");
    let path = dir.path().join("range.zood");
    write_bundle(&bundle, &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    // class_count lives after magic(4) + version(2) + n(4) + d(4)
    bytes[14] = 1;
    bytes[15] = 0;
    bytes[16] = 0;
    bytes[17] = 0;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        read_bundle(&path).unwrap_err(),
        IoError::RangeViolation
    ));
}

#[test]
fn csv_and_binary_agree_on_the_same_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = random_bundle(56, 60, 7, "both");
    let bin = dir.path().join("both.zood");
    let csv = dir.path().join("both.csv");
    write_bundle(&bundle, &bin).unwrap();
    write_bundle(&bundle, &csv).unwrap();
    let from_bin = read_bundle(&bin).unwrap();
    let from_csv = read_bundle(&csv).unwrap();
    assert_eq!(from_bin.labels, from_csv.labels);
    assert_eq!(from_bin.domains, from_csv.domains);
    for (a, b) in from_bin.features.iter().zip(from_csv.features.iter()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn every_fixture_has_the_published_shape() {
    for name in FIXTURE_DATASETS {
        let table = load_fixture(name).unwrap();
        assert_eq!(table.rows.len(), 35, "{name}");
        let headless: Vec<u32> = table
            .rows
            .iter()
            .filter(|r| r.leep.is_none())
            .map(|r| r.model_number)
            .collect();
        assert_eq!(headless, [15, 16, 17, 18, 19, 20, 21, 22, 34, 35], "{name}");
        let nce_less: Vec<u32> = table
            .rows
            .iter()
            .filter(|r| r.nce.is_none())
            .map(|r| r.model_number)
            .collect();
        assert_eq!(nce_less, headless, "{name}");
        for r in &table.rows {
            assert!(r.zood.is_some() && r.accuracy > 0.0, "{name} model {}", r.model_number);
        }
    }
}

#[test]
fn fixture_spot_values_match_the_published_tables() {
    let pacs = load_fixture("pacs").unwrap();
    let first = &pacs.rows[0];
    assert_eq!(first.model_number, 1);
    assert_eq!(first.h_score, Some(5.016));
    assert_eq!(first.knn, Some(49.608));
    assert_eq!(first.logme, Some(0.226));
    assert_eq!(first.zood, Some(0.053));
    assert_eq!(first.accuracy, 66.9);
    let m35 = &pacs.rows[34];
    assert_eq!(m35.zood, Some(0.653));
    assert_eq!(m35.accuracy, 96.0);

    let vlcs = load_fixture("vlcs").unwrap();
    let m26 = &vlcs.rows[25];
    assert_eq!(m26.zood, Some(0.190));
    assert_eq!(m26.accuracy, 77.9);

    let dn = load_fixture("domainnet").unwrap();
    let m30 = &dn.rows[29];
    assert_eq!(m30.zood, Some(1.328));
    assert_eq!(m30.accuracy, 48.2);
}

#[test]
fn unknown_fixture_name_errors() {
    assert!(matches!(
        load_fixture("nope").unwrap_err(),
        IoError::UnknownDataset(_)
    ));
}

#[test]
fn manifest_round_trips_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = ZooManifest {
        dataset_name: "demo".into(),
        models: vec![
            ManifestEntry { model_id: "a".into(), path: "a.zood".into() },
            ManifestEntry { model_id: "b".into(), path: "b.zood".into() },
        ],
        class_count: 3,
        domain_count: 4,
        domain_names: vec!["p".into(), "a".into(), "c".into(), "s".into()],
    };
    let path = dir.path().join("zoo.json");
    write_manifest(&manifest, &path).unwrap();
    let back = read_manifest(&path).unwrap();
    assert_eq!(back.dataset_name, "demo");
    assert_eq!(back.models.len(), 2);

    let mut dup = manifest.clone();
    dup.models[1].model_id = "a".into();
    assert!(matches!(
        write_manifest(&dup, &path).unwrap_err(),
        IoError::ManifestDuplicate(_)
    ));
}
