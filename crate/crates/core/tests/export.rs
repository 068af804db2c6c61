use std::fs;

use qaction::harness::export::export_report;
use qaction::harness::model::{GaugeTag, ModelSpec};
use qaction::harness::pipeline::run_pipeline;

#[test]
fn export_is_deterministic_and_documented() {
    let mut spec = ModelSpec::m2();
    spec.gauges = vec![GaugeTag::Centered];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files_a = export_report(&run_pipeline(&spec).unwrap(), a.path()).unwrap();
    let files_b = export_report(&run_pipeline(&spec).unwrap(), b.path()).unwrap();
    assert_eq!(files_a.len(), files_b.len());
    for (x, y) in files_a.iter().zip(&files_b) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }

    let fields = fs::read_to_string(a.path().join("fields_band0.csv")).unwrap();
    assert!(fields.starts_with("x1,x2,k,lambda,mu,omega12,theta1,theta2,y1,y2"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["provenance"]["tolerances"]["edge_decay"].is_number());
}

#[test]
fn unwritable_directory_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut spec = ModelSpec::m1();
    spec.gauges = vec![GaugeTag::Centered];
    spec.bands = vec![0];
    let err = export_report(&run_pipeline(&spec).unwrap(), &blocker.join("sub")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
