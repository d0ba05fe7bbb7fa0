mod common;

use std::time::Duration;

use tsp_core::encoding::{encode_inference, encode_training};
use tsp_core::geometry::generate_instance;
use tsp_core::predictor::{fit, ExternalAdapter, PredictorSpec};
use tsp_core::{Error, Tour};

fn adapter(dir: &std::path::Path, extra: &str) -> ExternalAdapter {
    let stub = common::write_stub(dir);
    let cmd = format!("python3 {} {extra}", stub.display());
    ExternalAdapter::from_command_line(&cmd, dir.join("work")).unwrap()
}

#[test]
fn fit_then_predict_echoes_current_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PredictorSpec::external(adapter(dir.path(), ""));
    let inst = generate_instance(20, 3).unwrap();
    let train = encode_training(&inst, &Tour::new((0..20).collect()), 5).unwrap();
    let fitted = fit(&spec, &train).unwrap();
    let model = fitted.model.clone().unwrap();
    assert!(model.is_dir());
    assert_eq!(fitted.training_rows, 20);

    let table = encode_inference(&inst, 5).unwrap();
    let preds = fitted.predict(&table, None, inst.id()).unwrap();
    // reverse row order in the file, keyed merge restores node order
    assert_eq!(preds.points(), inst.nodes());
}

#[test]
fn predict_without_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = PredictorSpec::external(adapter(dir.path(), "")).unfitted(None);
    let table = encode_inference(&generate_instance(8, 1).unwrap(), 3).unwrap();
    assert!(matches!(p.predict(&table, None, "x"), Err(Error::Precondition(_))));
}

#[test]
fn nonzero_exit_carries_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PredictorSpec::external(adapter(dir.path(), "--mode fail"));
    let inst = generate_instance(8, 1).unwrap();
    let train = encode_training(&inst, &Tour::new((0..8).collect()), 3).unwrap();
    match fit(&spec, &train) {
        Err(Error::Adapter { diagnostics, .. }) => assert!(diagnostics.contains("stub adapter refusing")),
        other => panic!("expected adapter error, got {other:?}"),
    }
}

#[test]
fn timeout_kills_the_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = adapter(dir.path(), "--mode sleep");
    a.timeout = Duration::from_millis(300);
    let spec = PredictorSpec::external(a);
    let inst = generate_instance(8, 1).unwrap();
    let train = encode_training(&inst, &Tour::new((0..8).collect()), 3).unwrap();
    let start = std::time::Instant::now();
    match fit(&spec, &train) {
        Err(Error::Adapter { message, .. }) => assert!(message.contains("timed out")),
        other => panic!("expected timeout, got {other:?}"),
    }
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn malformed_predictions_are_an_adapter_error() {
    let dir = tempfile::tempdir().unwrap();
    let ok = PredictorSpec::external(adapter(dir.path(), ""));
    let inst = generate_instance(8, 1).unwrap();
    let train = encode_training(&inst, &Tour::new((0..8).collect()), 3).unwrap();
    let model = fit(&ok, &train).unwrap().model;

    let bad = PredictorSpec::external(adapter(dir.path(), "--mode garbage")).unfitted(model);
    let table = encode_inference(&inst, 3).unwrap();
    assert!(matches!(bad.predict(&table, None, "x"), Err(Error::Adapter { .. })));
}
