mod common;

use chunkvqa::datasets::{make_split, SplitSpec};
use chunkvqa::features::FeatureMode;
use chunkvqa::training::{evaluate_model, train_model, QualityModel, SampleUnit};
use chunkvqa::VqaError;

fn all_train(n: usize) -> SplitSpec {
    SplitSpec {
        seed: 0,
        repeat_index: 0,
        train_ids: (0..n).collect(),
        test_ids: Vec::new(),
    }
}

#[test]
fn overfits_sixteen_videos() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 16, 41);
    let mut cfg = common::quick_config(100);
    cfg.batch_size = 8;
    let (_, log) = train_model(&manifest, &all_train(16), &cfg).unwrap();
    assert_eq!(log.step_losses.len(), 200);
    let initial = log.initial_loss().unwrap();
    let last = log.final_loss().unwrap();
    assert!(last < 0.25 * initial, "loss {initial} -> {last}");
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 12, 5);
    let split = make_split(12, 3, 0);
    let cfg = common::quick_config(3);
    let (m1, l1) = train_model(&manifest, &split, &cfg).unwrap();
    let (m2, l2) = train_model(&manifest, &split, &cfg).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(m1.head, m2.head);
    assert_eq!(m1.backbone, m2.backbone);
}

#[test]
fn motion_network_stays_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 10, 8);
    let cfg = common::quick_config(2);
    let fresh = QualityModel::new(&cfg, 3.0).unwrap();
    let before: Vec<u64> = fresh
        .motion_adapter()
        .unwrap()
        .parameters()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    assert!(!before.is_empty());
    let (trained, _) = train_model(&manifest, &all_train(10), &cfg).unwrap();
    let motion = trained.motion_adapter().unwrap();
    assert!(!motion.trainable());
    let after: Vec<u64> = motion.parameters().iter().map(|v| v.to_bits()).collect();
    assert_eq!(before, after);
    // the trainable parts did move
    assert_ne!(fresh.head, trained.head);
}

#[test]
fn evaluation_does_not_mutate_model() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 10, 13);
    let split = make_split(10, 0, 0);
    let cfg = common::quick_config(1);
    let (model, _) = train_model(&manifest, &split, &cfg).unwrap();
    let snapshot = model.clone();
    let mut everything = all_train(10);
    everything.test_ids = everything.train_ids.clone();
    let a = evaluate_model(&model, &manifest, &everything).unwrap();
    let b = evaluate_model(&model, &manifest, &everything).unwrap();
    assert_eq!(a, b);
    assert_eq!(snapshot.head, model.head);
    assert_eq!(snapshot.backbone, model.backbone);
}

#[test]
fn all_chunks_and_ablations_train() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 8, 21);
    for mode in [FeatureMode::Spatial, FeatureMode::Motion] {
        let mut cfg = common::quick_config(1);
        cfg.feature_mode = mode;
        cfg.sample_unit = SampleUnit::AllChunks;
        let (model, log) = train_model(&manifest, &all_train(8), &cfg).unwrap();
        assert_eq!(model.backbone.is_some(), mode.uses_spatial());
        assert_eq!(model.motion_adapter().is_some(), mode.uses_motion());
        assert!(log.final_loss().unwrap().is_finite());
    }
}

#[test]
fn divergence_reports_batch_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 8, 2);
    let mut cfg = common::quick_config(50);
    cfg.learning_rate = f64::MAX;
    match train_model(&manifest, &all_train(8), &cfg) {
        Err(VqaError::Numeric(msg)) => {
            assert!(msg.contains("batch records"), "{msg}");
            assert!(msg.contains("learning rate"), "{msg}");
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("expected divergence"),
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::synth(dir.path(), 8, 17);
    let cfg = common::quick_config(1);
    let (model, _) = train_model(&manifest, &all_train(8), &cfg).unwrap();
    let path = dir.path().join("model.ckpt.json");
    model.save(&path).unwrap();
    let loaded = QualityModel::load(&path).unwrap();
    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.head, model.head);
    assert_eq!(loaded.backbone, model.backbone);

    // editing the config without refreshing the fingerprint is rejected
    let text = std::fs::read_to_string(&path).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["config"]["learning_rate"] = serde_json::json!(0.5);
    std::fs::write(&path, json.to_string()).unwrap();
    assert!(QualityModel::load(&path).is_err());
}
