use wheeldyn_core::analytical::RobotParams;
use wheeldyn_core::datagen::{collect, OracleConfig};
use wheeldyn_core::dataset::split_dataset_blocks;
use wheeldyn_core::ego::TransformMode;
use wheeldyn_core::eval::{rmse_by_length, rollout};
use wheeldyn_core::models::{ModelKind, ModelSpec, RolloutWindow};
use wheeldyn_core::training::{fit_norm_stats, param_search, progressive_train, SearchConfig, TrainConfig};

fn model(kind: ModelKind, seed: u64) -> ModelSpec {
    ModelSpec::new(kind, TransformMode::Egocentric, RolloutWindow::default(), RobotParams::default(), seed).unwrap()
}

#[test]
fn collect_split_train_evaluate() {
    let c = collect(&OracleConfig { seed: 21, ..Default::default() }, 240.0).unwrap();
    let ds = &c.dataset;
    assert_eq!(c.latent.len(), ds.len());
    let (train, test) = split_dataset_blocks(ds, 0.3, 21, 30.0).unwrap();
    assert_eq!(train.len() + test.len(), ds.len());
    assert_eq!(train.commands.len() + test.commands.len(), ds.commands.len());
    let (tr, val) = split_dataset_blocks(&train, 0.2, 22, 15.0).unwrap();

    let mut spec = model(ModelKind::Lr, 21);
    fit_norm_stats(&mut spec, &tr, 1.5).unwrap();
    let before = rmse_by_length(&spec, &test, &[8, 32], 32, 1.5).unwrap();
    let cfg = TrainConfig {
        max_length: 8,
        batch_size: 16,
        eval_every: 5,
        max_epochs_per_stage: 20,
        val_segments: 16,
        initial_lr: 3e-3,
        seed: 21,
        ..Default::default()
    };
    let (trained, log) = progressive_train(&spec, &tr, &val, &cfg).unwrap();
    assert_eq!(log.stages.iter().map(|s| s.length).collect::<Vec<_>>(), [1, 2, 4, 8]);
    assert!(log.curve.windows(2).all(|w| w[0].update < w[1].update));
    let after = rmse_by_length(&trained, &test, &[8, 32], 32, 1.5).unwrap();
    for (b, a) in before.rows.iter().zip(&after.rows) {
        assert!(a.1 < b.1, "length {}: {} -> {}", b.0, b.1, a.1);
    }

    assert!(after.rows.iter().all(|r| r.2 > 0));
    let traj = rollout(&trained, &test, 200, 40).unwrap();
    assert_eq!(traj.len(), 40);
    assert_eq!(traj.points[0].t, test.poses.points[201].t);
}

#[test]
fn true_parameters_beat_the_untuned_formulated_model() {
    let oracle = OracleConfig { seed: 22, ..Default::default() };
    let ds = collect(&oracle, 120.0).unwrap().dataset;
    let untuned = model(ModelKind::ParamOnly, 0);
    let mut tuned = untuned.clone();
    tuned.robot = oracle.true_params;
    let a = rmse_by_length(&untuned, &ds, &[64], 32, 1.5).unwrap().rows[0].1;
    let b = rmse_by_length(&tuned, &ds, &[64], 32, 1.5).unwrap().rows[0].1;
    assert!(b < a / 2.0, "{b} vs {a}");
}

#[test]
fn search_recovers_slip_gains_on_clean_data() {
    let truth = RobotParams { slip_gain_s: 0.85, slip_gain_w: 1.15, ..RobotParams::default() };
    let ds = collect(&OracleConfig { seed: 23, ..OracleConfig::noiseless(truth) }, 120.0).unwrap().dataset;
    let d = RobotParams::default();
    let mut ranges = d.to_array().map(|v| (v, v));
    ranges[4] = (0.5, 1.5);
    ranges[5] = (0.5, 1.5);
    let cfg = SearchConfig { budget: 120, ranges, segments: 16, ..Default::default() };
    let r = param_search(&model(ModelKind::ParamOnly, 0), &cfg, &ds, 64).unwrap();
    assert!((r.best.slip_gain_s - 0.85).abs() < 0.01, "{:?}", r.best);
    assert!((r.best.slip_gain_w - 1.15).abs() < 0.01, "{:?}", r.best);
    assert!(r.history.len() <= 120);
}
