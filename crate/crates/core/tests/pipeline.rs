use p2ad::data::{make_dataset, Dataset, NoiseParams, SynthParams};
use p2ad::eval::{emit_csv, read_csv, sweep, NetworkKind, SweepConfig, CSV_HEADER};
use p2ad::network::{ConvSpec, Model, ModelSpec, RegularModel};
use p2ad::tensor::FixedWeight;
use p2ad::train::{train_run, TrainConfig};

fn small() -> (SynthParams, ModelSpec) {
    let synth = SynthParams { width: 32, height: 32, ..SynthParams::default() };
    let spec = ModelSpec {
        input_height: 32,
        input_width: 32,
        convs: vec![ConvSpec::new(4, 4, 2, 1), ConvSpec::new(8, 4, 2, 1)],
        hidden: vec![16],
        ..ModelSpec::default()
    };
    (synth, spec)
}

#[test]
fn dataset_survives_disk_round_trip() {
    let (synth, _) = small();
    let ds = make_dataset(&synth, 10, 8, 4, 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.content_hash(), ds.content_hash());
    let other = make_dataset(&synth, 10, 8, 5, 0.5).unwrap();
    assert_ne!(other.content_hash(), ds.content_hash());
}

#[test]
fn sweep_is_deterministic_and_complete() {
    let (synth, spec) = small();
    let ds = make_dataset(&synth, 24, 24, 2, 0.5).unwrap();
    let cfg = TrainConfig { epochs_max: 3, batch_size: 16, learning_rate: 0.05, seed: 1, ..TrainConfig::default() };
    let pow2 = train_run::<p2ad::tensor::Pow2Weight>(&ds.train, &cfg, &spec).unwrap().model;
    let regular: RegularModel = train_run::<FixedWeight>(&ds.train, &cfg, &spec).unwrap().model;
    let configs = [SweepConfig::NONE, SweepConfig::soft(Some(0.009), Some(0.01)), SweepConfig::hard(Some(0.05), None)];
    let levels = [0, 5];
    let run = || sweep(&[&regular, &pow2], &ds.test, &configs, &levels, &NoiseParams::default(), 7).unwrap();
    let a = run();
    assert_eq!(a.rows.len(), 2 * configs.len() * levels.len());
    assert_eq!(a.rows[0].network, NetworkKind::Regular);
    assert_eq!(a.rows.last().unwrap().network, NetworkKind::Pow2);
    for r in &a.rows {
        assert!((0.0..=1.0).contains(&r.auc));
        if r.theta1.is_none() && r.theta2.is_none() {
            assert_eq!(r.savings_pct, 0.0);
        }
    }
    let b = run();
    assert_eq!(a, b);

    let text = emit_csv(&a.rows).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(read_csv(&text).unwrap(), a.rows);
}

#[test]
fn noise_free_level_matches_plain_inference() {
    let (synth, spec) = small();
    let ds = make_dataset(&synth, 6, 6, 3, 0.5).unwrap();
    let model: Model = Model::build(spec, 5).unwrap();
    let report = sweep(&[&model], &ds.test, &[SweepConfig::NONE], &[0], &NoiseParams::default(), 1).unwrap();
    let logits: Vec<f64> = ds.test.iter().map(|f| model.infer(&f.frame).unwrap().logit).collect();
    let labels: Vec<bool> = ds.test.iter().map(|f| f.label.is_anomalous()).collect();
    assert_eq!(report.rows[0].auc, p2ad::eval::roc_auc(&logits, &labels).unwrap().auc);
}
