mod common;

use anfm_graph::datasets::{generate, DatasetSpec, Family};
use anfm_graph::{build_filtration, FiltrationConfig, FiltrationFunction, Graph, LambdaSchedule};
use anfm_model::{
    expand, model_checkpoint, model_from_checkpoint, sample, trainer_checkpoint, trainer_from_checkpoint, AnfmModel,
    Checkpoint, CheckpointError, ModelConfig, ModelError, SampleMode, SequenceInputs, TrainConfig, Trainer,
};
use common::*;

fn small_graphs(count: usize) -> Vec<Graph> {
    let mut spec = DatasetSpec::new(Family::Planar, 5).with_counts(count, 1, 1);
    spec.planar.points = 8;
    generate(&spec).unwrap().train_graphs()
}

fn small_model() -> AnfmModel {
    AnfmModel::new(ModelConfig { hidden: 8, layers: 1, components: 2, steps: 4, max_nodes: 8, ..Default::default() })
        .unwrap()
}

fn small_train(steps: usize) -> TrainConfig {
    TrainConfig { steps, batch_size: 2, lr: 1e-2, seed: 11, ..Default::default() }
}

#[test]
fn noiseless_single_perturbation_is_the_filtration() {
    let graphs = small_graphs(5);
    let cfg = FiltrationConfig::new(FiltrationFunction::LineFiedler, 4);
    let store = expand(&graphs, &cfg, 1, &LambdaSchedule::none(), 3).unwrap();
    assert_eq!(store.len(), 5);
    for (g, seq) in graphs.iter().zip(&store) {
        assert_eq!(seq.edge_sets, build_filtration(g, &cfg).unwrap().edge_sets);
    }
}

#[test]
fn perturbations_multiply_the_store_and_keep_endpoints() {
    let graphs = small_graphs(6);
    let cfg = FiltrationConfig::new(FiltrationFunction::Dfs, 4);
    let store = expand(&graphs, &cfg, 4, &LambdaSchedule::default(), 3).unwrap();
    assert_eq!(store.len(), 24);
    for (i, seq) in store.iter().enumerate() {
        assert!(seq.edge_sets[0].is_empty());
        assert_eq!(seq.final_graph(), graphs[i / 4]);
    }
    // DFS filtrations redraw the root for every perturbation.
    let orderings: std::collections::HashSet<Vec<usize>> =
        store.iter().map(|s| (0..8).map(|v| s.ordering.position(v)).collect()).collect();
    assert!(orderings.len() > 6);
    assert_eq!(store, expand(&graphs, &cfg, 4, &LambdaSchedule::default(), 3).unwrap());
}

#[test]
fn loss_is_the_negative_mean_log_likelihood() {
    let graphs = small_graphs(3);
    let store =
        expand(&graphs, &FiltrationConfig::new(FiltrationFunction::LineFiedler, 4), 1, &LambdaSchedule::default(), 0)
            .unwrap();
    let mut trainer = Trainer::new(small_model(), small_train(1)).unwrap();
    let batch: Vec<SequenceInputs> = store.iter().map(|s| SequenceInputs::from_noisy(s).unwrap()).collect();
    let expected: f64 =
        -batch.iter().map(|b| trainer.model.sequence_log_likelihood(b).unwrap().total).sum::<f64>() / 3.0;
    let report = trainer.stage1_step(&batch).unwrap();
    assert!((report.loss - expected).abs() <= 1e-12 * expected.abs());
    let after: f64 = -batch.iter().map(|b| trainer.model.sequence_log_likelihood(b).unwrap().total).sum::<f64>() / 3.0;
    assert!(after < expected, "one step should lower the batch loss: {after} vs {expected}");
}

#[test]
fn empty_batch_and_bad_config_are_rejected() {
    let mut trainer = Trainer::new(small_model(), small_train(1)).unwrap();
    assert!(trainer.stage1_step(&[]).is_err());
    assert!(Trainer::new(small_model(), TrainConfig { lr: 0.0, ..Default::default() }).is_err());
    assert!(Trainer::new(small_model(), TrainConfig { grad_clip: Some(-1.0), ..Default::default() }).is_err());
}

#[test]
fn non_finite_weights_abort_with_a_numeric_failure() {
    let mut model = small_model();
    let id = model.params.id("decoder.comp0.dense3.b").unwrap();
    model.params.get_mut(id).data[0] = f64::NAN;
    let mut trainer = Trainer::new(model, small_train(1)).unwrap();
    let batch = [random_inputs(5, 4, 0)];
    assert!(matches!(trainer.stage1_step(&batch), Err(ModelError::NumericFailure(_))));
}

#[test]
fn clipping_bounds_the_update() {
    let batch = [random_inputs(6, 4, 1)];
    let mut clipped = Trainer::new(small_model(), TrainConfig { grad_clip: Some(1e-9), ..small_train(1) }).unwrap();
    let mut free = Trainer::new(small_model(), small_train(1)).unwrap();
    let a = clipped.stage1_step(&batch).unwrap();
    let b = free.stage1_step(&batch).unwrap();
    // Reports carry the norm before clipping.
    assert_eq!(a.grad_norm, b.grad_norm);
    assert_ne!(clipped.model.params, free.model.params);
}

#[test]
fn resuming_from_a_checkpoint_is_bit_identical() {
    let graphs = small_graphs(4);
    let store =
        expand(&graphs, &FiltrationConfig::new(FiltrationFunction::LineFiedler, 4), 2, &LambdaSchedule::default(), 1)
            .unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let mut straight = Trainer::new(small_model(), small_train(100)).unwrap();
        straight.train(&store, |_, _| Ok(())).unwrap();

        let mut first = Trainer::new(small_model(), small_train(50)).unwrap();
        first.train(&store, |_, _| Ok(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stage1.ckpt");
        trainer_checkpoint(&first).save(&path).unwrap();
        let mut resumed = trainer_from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(resumed.step, 50);
        resumed.config.steps = 100;
        resumed.train(&store, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.model.params, straight.model.params);
        assert_eq!(resumed.adam, straight.adam);
    });
}

#[test]
fn model_round_trip_reproduces_samples() {
    let model = small_model();
    let bytes = model_checkpoint(&model).to_bytes();
    let loaded = model_from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(loaded.params, model.params);
    let a = sample(&model, 7, &mut rng(4), SampleMode::Stochastic).unwrap();
    let b = sample(&loaded, 7, &mut rng(4), SampleMode::Stochastic).unwrap();
    assert_eq!(a.edge_sets, b.edge_sets);
    assert_eq!(a.step_log_probs, b.step_log_probs);
    assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes(), bytes);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let bytes = model_checkpoint(&small_model()).to_bytes();
    for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(CheckpointError::Truncated)), "cut {cut}");
    }
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&magic), Err(CheckpointError::BadMagic)));
    let mut version = bytes.clone();
    version[4] = 7;
    assert!(matches!(Checkpoint::from_bytes(&version), Err(CheckpointError::Version { found: 7 })));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(Checkpoint::from_bytes(&trailing), Err(CheckpointError::TrailingBytes)));
}

#[test]
fn config_tensor_mismatch_is_incompatible() {
    let mut ck = model_checkpoint(&small_model());
    ck.config["model"]["hidden"] = 16.into();
    let err = model_from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap_err();
    assert!(matches!(err, CheckpointError::Incompatible(_)));
    assert!(err.to_string().starts_with("incompatible checkpoint"));

    let mut missing = model_checkpoint(&small_model());
    missing.tensors.pop();
    assert!(matches!(model_from_checkpoint(&missing), Err(CheckpointError::Incompatible(_))));

    let mut extra = model_checkpoint(&small_model());
    extra.tensors.push(("gen.stray".into(), anfm_tensor::Tensor::scalar(1.0)));
    assert!(matches!(model_from_checkpoint(&extra), Err(CheckpointError::Incompatible(_))));
}
