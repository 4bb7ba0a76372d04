//! Steps shared by the command-line tool and the acceptance harness.

use std::path::Path;
use std::time::Instant;

use anfm_eval::{compare, vun, DescriptorKind, EvalReport};
use anfm_graph::datasets::{valid, Family};
use anfm_graph::{derive_seed, Graph, NoisySequence};
use anfm_model::{
    expand, model_from_checkpoint, sample_many, AnfmModel, Checkpoint, ModelError, SampleMode, StepReport, Trainer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{AnfmError, RunConfig};

/// Node counts drawn uniformly from the training graphs.
pub fn empirical_sizes(train: &[Graph], count: usize, seed: u64) -> Result<Vec<usize>, AnfmError> {
    if train.is_empty() {
        return Err(AnfmError::Data("no training graphs to draw sizes from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| train[rng.random_range(0..train.len())].n()).collect())
}

/// Final graphs of one rollout per size, with the mean seconds per graph.
pub fn sample_graphs(
    model: &AnfmModel,
    sizes: &[usize],
    seed: u64,
    mode: SampleMode,
) -> Result<(Vec<Graph>, f64), AnfmError> {
    let start = Instant::now();
    let graphs: Vec<Graph> = sample_many(model, sizes, seed, mode)?.iter().map(|r| r.final_graph()).collect();
    let per_graph = start.elapsed().as_secs_f64() / sizes.len().max(1) as f64;
    Ok((graphs, per_graph))
}

/// Erdos-Renyi graphs whose size and edge density copy a randomly chosen
/// training graph.
pub fn density_matched_er(train: &[Graph], count: usize, seed: u64) -> Result<Vec<Graph>, AnfmError> {
    if train.is_empty() {
        return Err(AnfmError::Data("no training graphs to match".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let template = &train[rng.random_range(0..train.len())];
            let (n, p) = (template.n(), template.density());
            let edges: Vec<_> =
                (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|_| rng.random::<f64>() < p).collect();
            Graph::from_pairs_lossy(n, edges)
        })
        .collect())
}

/// Noisy training sequences for `graphs` under the run's filtration and noise settings.
pub fn training_sequences(config: &RunConfig, graphs: &[Graph]) -> Result<Vec<NoisySequence>, AnfmError> {
    if let Some(g) = graphs.iter().find(|g| g.n() > config.model.max_nodes) {
        return Err(AnfmError::Data(format!(
            "training graph with {} nodes exceeds model.max_nodes = {}",
            g.n(),
            config.model.max_nodes
        )));
    }
    let sequences = expand(
        graphs,
        &config.filtration_config(),
        config.train.perturbations,
        &config.lambda(),
        derive_seed(config.seed, 6),
    )?;
    Ok(sequences)
}

pub struct Stage1Outcome {
    pub trainer: Trainer,
    pub seconds: f64,
    pub last: Option<StepReport>,
}

/// Stage I from freshly initialized weights.
pub fn train_stage1(
    config: &RunConfig,
    graphs: &[Graph],
    mut on_step: impl FnMut(&Trainer, &StepReport) -> Result<(), ModelError>,
) -> Result<Stage1Outcome, AnfmError> {
    let start = Instant::now();
    let sequences = training_sequences(config, graphs)?;
    let mut trainer = Trainer::new(AnfmModel::new(config.model.clone())?, config.train.clone())?;
    let mut last = None;
    trainer.train(&sequences, |t, r| {
        last = Some(*r);
        on_step(t, r)
    })?;
    Ok(Stage1Outcome { trainer, seconds: start.elapsed().as_secs_f64(), last })
}

/// The generator stored in a checkpoint of any kind.
pub fn load_generator(path: &Path) -> Result<AnfmModel, AnfmError> {
    Ok(model_from_checkpoint(&Checkpoint::load(path)?)?)
}

/// Descriptor MMDs against `reference`, the train-vs-reference baseline and VUN.
pub fn evaluate(
    samples: &[Graph],
    reference: &[Graph],
    train: &[Graph],
    family: Family,
    kinds: &[DescriptorKind],
) -> Result<EvalReport, AnfmError> {
    let mut report = EvalReport::new(samples.len(), reference.len(), compare(samples, reference, kinds)?);
    if !train.is_empty() {
        report.baseline = Some(compare(train, reference, kinds)?);
    }
    report.vun = Some(vun(samples, train, |g| valid(g, family)));
    Ok(report)
}
