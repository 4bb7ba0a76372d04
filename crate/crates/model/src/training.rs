//! Stage I: teacher-forced maximum likelihood over noisy filtration sequences.

use anfm_graph::{
    build_filtration, derive_seed, noise_augment, FiltrationConfig, Graph, LambdaSchedule, NoisySequence,
};
use anfm_tensor::{clip_grad_norm, Adam, ParamGrads, ParamStore, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inputs::SequenceInputs;
use crate::model::AnfmModel;
use crate::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Global l2 gradient-norm bound; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Noisy sequences drawn per training graph.
    pub perturbations: usize,
    pub lambda: LambdaSchedule,
    pub seed: u64,
    /// Steps between progress reports and checkpoints.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            batch_size: 8,
            lr: 1e-3,
            grad_clip: None,
            perturbations: 4,
            lambda: LambdaSchedule::default(),
            seed: 0,
            eval_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.batch_size == 0 || self.perturbations == 0 || self.eval_every == 0 {
            return bad("batch_size, perturbations and eval_every must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        self.lambda.validate()?;
        Ok(())
    }
}

/// Materializes `perturbations` noisy sequences per graph. Sequence `p` of
/// graph `i` uses its own seed for the filtration (a fresh DFS root) and the
/// noise.
pub fn expand(
    graphs: &[Graph],
    filtration: &FiltrationConfig,
    perturbations: usize,
    lambda: &LambdaSchedule,
    seed: u64,
) -> Result<Vec<NoisySequence>, ModelError> {
    filtration.validate()?;
    lambda.validate()?;
    (0..graphs.len() * perturbations)
        .into_par_iter()
        .map(|idx| {
            let s = derive_seed(seed, idx as u64);
            let cfg = filtration.clone().with_seed(s);
            let seq = build_filtration(&graphs[idx / perturbations], &cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s, 1));
            Ok(noise_augment(&seq, lambda, &mut rng))
        })
        .collect()
}

/// Per-item scalar objectives, any side outputs, and the summed parameter
/// gradients. Items are processed in parallel; the reduction runs in item
/// order, so the result does not depend on the thread count.
pub(crate) fn batch_gradients<T: Sync, E: Send>(
    store: &ParamStore,
    items: &[T],
    objective: impl Fn(&mut Tape, &T) -> Result<(Var, E), ModelError> + Sync,
) -> Result<(Vec<(f64, E)>, ParamGrads), ModelError> {
    let parts: Vec<(f64, E, ParamGrads)> = items
        .par_iter()
        .map(|item| {
            let mut tape = Tape::new();
            let (out, extra) = objective(&mut tape, item)?;
            let value = tape.value(out).item();
            Ok((value, extra, tape.backward(out)?.into_param_grads(store)))
        })
        .collect::<Result<_, ModelError>>()?;
    let mut total = ParamGrads::zeros_like(store);
    let mut values = Vec::with_capacity(parts.len());
    for (v, e, g) in parts {
        total.accumulate(&g);
        values.push((v, e));
    }
    Ok((values, total))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    /// `-(1/B) sum_b ln p(sequence_b)`.
    pub loss: f64,
    pub grad_norm: f64,
}

/// Adam state, batch sampler and step counter around a generator.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: AnfmModel,
    pub config: TrainConfig,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
    pub step: usize,
}

impl Trainer {
    pub fn new(model: AnfmModel, config: TrainConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let adam = Adam::new(&model.params);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { model, config, adam, rng, step: 0 })
    }

    /// One optimizer step on `batch`; returns the loss before the update.
    pub fn stage1_step(&mut self, batch: &[SequenceInputs]) -> Result<StepReport, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::InvalidInput("empty batch".into()));
        }
        let model = &self.model;
        let result = batch_gradients(&model.params, batch, |tape, inputs| {
            Ok((model.log_likelihood_vars(tape, inputs)?.total, ()))
        });
        let (values, mut grads) = result.map_err(|e| self.numeric_failure(e))?;
        let loss = -values.iter().map(|(v, _)| v).sum::<f64>() / batch.len() as f64;
        grads.scale(-1.0 / batch.len() as f64);
        let grad_norm = grads.global_norm();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(ModelError::NumericFailure(format!(
                "step {}: loss {loss}, gradient norm {grad_norm}",
                self.step
            )));
        }
        if let Some(max) = self.config.grad_clip {
            clip_grad_norm(&mut grads, max);
        }
        self.adam.update(&mut self.model.params, &grads, self.config.lr);
        self.step += 1;
        Ok(StepReport { step: self.step, loss, grad_norm })
    }

    fn numeric_failure(&self, e: ModelError) -> ModelError {
        match e {
            ModelError::Tensor(t) => ModelError::NumericFailure(format!("step {}: {t}", self.step)),
            other => other,
        }
    }

    /// Draws a batch uniformly with replacement from `store`.
    pub fn sample_batch(&mut self, store: &[NoisySequence]) -> Result<Vec<SequenceInputs>, ModelError> {
        if store.is_empty() {
            return Err(ModelError::InvalidInput("no training sequences".into()));
        }
        let picks: Vec<usize> = (0..self.config.batch_size).map(|_| self.rng.random_range(0..store.len())).collect();
        picks.par_iter().map(|&i| SequenceInputs::from_noisy(&store[i])).collect()
    }

    /// Runs until `config.steps`; `on_step` sees every report.
    pub fn train(
        &mut self,
        store: &[NoisySequence],
        mut on_step: impl FnMut(&Trainer, &StepReport) -> Result<(), ModelError>,
    ) -> Result<(), ModelError> {
        while self.step < self.config.steps {
            let batch = self.sample_batch(store)?;
            let report = self.stage1_step(&batch)?;
            on_step(self, &report)?;
        }
        Ok(())
    }
}
