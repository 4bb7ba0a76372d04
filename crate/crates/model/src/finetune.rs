//! Stage II: adversarial fine-tuning of the generator with PPO against a
//! graph discriminator, baselined by a learned value model.

use anfm_graph::{derive_seed, node_features, spectral::RWPE_DIM, Graph};
use anfm_tensor::{Adam, ParamStore, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::config::ModelConfig;
use crate::inputs::SequenceInputs;
use crate::layers::{Linear, Mlp};
use crate::likelihood::log_sigmoid;
use crate::model::AnfmModel;
use crate::sampling::{sample_many, Rollout, SampleMode};
use crate::training::batch_gradients;
use crate::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub iterations: usize,
    /// Rollouts per iteration.
    pub samples: usize,
    pub clip_eps: f64,
    /// Lower bound on terminal rewards.
    pub reward_floor: f64,
    /// PPO passes over each batch of rollouts.
    pub epochs: usize,
    /// Generator learning rate.
    pub lr: f64,
    /// Decay of the reward-whitening moving averages.
    pub ema_decay: f64,
    pub disc_hidden: usize,
    pub disc_layers: usize,
    pub disc_lr: f64,
    /// Discriminator steps after every generator update.
    pub disc_steps: usize,
    pub disc_pretrain_steps: usize,
    /// Real (and generated) graphs per discriminator step.
    pub disc_batch: usize,
    pub value_lr: f64,
    /// Value regression steps on every batch of rollouts.
    pub value_steps: usize,
    pub value_pretrain_steps: usize,
    pub mode: SampleMode,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            samples: 16,
            clip_eps: 0.2,
            reward_floor: -10.0,
            epochs: 4,
            lr: 1e-5,
            ema_decay: 0.99,
            disc_hidden: 128,
            disc_layers: 3,
            disc_lr: 1e-4,
            disc_steps: 1,
            disc_pretrain_steps: 200,
            disc_batch: 16,
            value_lr: 2.5e-4,
            value_steps: 2,
            value_pretrain_steps: 50,
            mode: SampleMode::Stochastic,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must lie in (0, 1)");
        }
        if self.samples == 0
            || self.epochs == 0
            || self.disc_batch == 0
            || self.disc_layers == 0
            || self.disc_hidden == 0
        {
            return bad("samples, epochs, disc_batch, disc_layers and disc_hidden must be positive");
        }
        for lr in [self.lr, self.disc_lr, self.value_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("learning rates must be positive");
            }
        }
        if !self.reward_floor.is_finite() {
            return bad("reward_floor must be finite");
        }
        Ok(())
    }
}

/// Message-passing classifier on random-walk encodings: GIN layers
/// `h <- relu(MLP(h + A h))`, mean pooling and a linear logit.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub params: ParamStore,
    pub hidden: usize,
    input: Linear,
    layers: Vec<Mlp>,
    head: Linear,
}

impl Discriminator {
    pub fn new(hidden: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let input = Linear::new(&mut params, "input", RWPE_DIM, hidden, &mut rng);
        let layers = (0..layers).map(|l| Mlp::new(&mut params, &format!("gin{l}"), [hidden; 3], &mut rng)).collect();
        let head = Linear::new(&mut params, "head", hidden, 1, &mut rng);
        Self { params, hidden, input, layers, head }
    }

    /// Scalar logit of "real".
    pub fn logit_var(&self, tape: &mut Tape, g: &Graph) -> Result<Var, ModelError> {
        let n = g.n().max(1);
        let f = node_features(g);
        let rw: Vec<f64> = if g.n() == 0 { vec![0.0; RWPE_DIM] } else { f.rwpe.concat() };
        let mut adjacency = vec![0.0; n * n];
        for &(a, b) in g.edges() {
            adjacency[a * n + b] = 1.0;
            adjacency[b * n + a] = 1.0;
        }
        let x = tape.constant(Tensor { shape: vec![n, RWPE_DIM], data: rw })?;
        let a = tape.constant(Tensor { shape: vec![n, n], data: adjacency })?;
        let mut h = self.input.forward(tape, &self.params, x)?;
        for layer in &self.layers {
            let agg = tape.matmul(a, h)?;
            let agg = tape.add(h, agg)?;
            let z = layer.forward(tape, &self.params, agg)?;
            h = tape.relu(z)?;
        }
        let pooled = tape.mean_axis(h, 0)?;
        let pooled = tape.reshape(pooled, &[1, self.hidden])?;
        let logit = self.head.forward(tape, &self.params, pooled)?;
        Ok(tape.sum_all(logit)?)
    }

    pub fn logit(&self, g: &Graph) -> Result<f64, ModelError> {
        let mut tape = Tape::inference();
        let v = self.logit_var(&mut tape, g)?;
        Ok(tape.value(v).item())
    }
}

/// `max(log sigmoid(d(g)), floor)`.
pub fn terminal_reward(disc: &Discriminator, g: &Graph, floor: f64) -> Result<f64, ModelError> {
    Ok(clamped_reward(disc.logit(g)?, floor))
}

pub fn clamped_reward(logit: f64, floor: f64) -> f64 {
    log_sigmoid(logit).max(floor)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscReport {
    /// Mean binary cross-entropy before the update.
    pub loss: f64,
    /// Fraction of graphs on the correct side of logit 0.
    pub accuracy: f64,
}

/// One Adam step of binary cross-entropy on `real` (label 1) and `fake`
/// (label 0).
pub fn discriminator_step(
    disc: &mut Discriminator,
    adam: &mut Adam,
    real: &[Graph],
    fake: &[Graph],
    lr: f64,
) -> Result<DiscReport, ModelError> {
    let items: Vec<(&Graph, bool)> = real.iter().map(|g| (g, true)).chain(fake.iter().map(|g| (g, false))).collect();
    if items.is_empty() {
        return Err(ModelError::InvalidInput("empty discriminator batch".into()));
    }
    let d = &*disc;
    let (values, mut grads) = batch_gradients(&d.params, &items, |tape, &(g, real)| {
        let logit = d.logit_var(tape, g)?;
        let signed = if real { logit } else { tape.scale(logit, -1.0)? };
        let ll = tape.log_sigmoid(signed)?;
        let logit_value = tape.value(logit).item();
        Ok((tape.scale(ll, -1.0)?, (logit_value > 0.0) == real))
    })?;
    let count = items.len() as f64;
    grads.scale(1.0 / count);
    adam.update(&mut disc.params, &grads, lr);
    let loss = values.iter().map(|(v, _)| v).sum::<f64>() / count;
    let accuracy = values.iter().filter(|(_, ok)| *ok).count() as f64 / count;
    Ok(DiscReport { loss, accuracy })
}

/// Generator backbone architecture with separate weights and a linear head on
/// mean-pooled node representations: one value per prefix `G~_0..G~_t`.
#[derive(Clone, Debug)]
pub struct ValueModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    backbone: Backbone,
    head: Linear,
}

impl ValueModel {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let backbone = Backbone::new(&mut params, "backbone", config, &mut rng);
        let head = Linear::new(&mut params, "head", config.hidden, 1, &mut rng);
        Ok(Self { config: config.clone(), params, backbone, head })
    }

    /// `(T,)` values; entry `t` reads only the input graphs `0..=t`.
    pub fn values_var(&self, tape: &mut Tape, inputs: &SequenceInputs) -> Result<Var, ModelError> {
        let h = self.backbone.forward(tape, &self.params, inputs)?;
        let pooled = tape.mean_axis(h, 1)?;
        let v = self.head.forward(tape, &self.params, pooled)?;
        Ok(tape.reshape(v, &[inputs.steps])?)
    }

    pub fn values(&self, inputs: &SequenceInputs) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::inference();
        let v = self.values_var(&mut tape, inputs)?;
        Ok(tape.value(v).data.clone())
    }
}

/// One Adam step of least squares `mean_j mean_t (v_{j,t} - r_j)^2`; returns
/// the loss before the update.
pub fn value_step(
    value: &mut ValueModel,
    adam: &mut Adam,
    sequences: &[SequenceInputs],
    rewards: &[f64],
    lr: f64,
) -> Result<f64, ModelError> {
    if sequences.len() != rewards.len() || sequences.is_empty() {
        return Err(ModelError::InvalidInput("value regression needs one reward per sequence".into()));
    }
    let items: Vec<(&SequenceInputs, f64)> = sequences.iter().zip(rewards.iter().copied()).collect();
    let v = &*value;
    let (losses, mut grads) = batch_gradients(&v.params, &items, |tape, &(inputs, r)| {
        let values = v.values_var(tape, inputs)?;
        let diff = tape.add_scalar(values, -r)?;
        let sq = tape.mul(diff, diff)?;
        Ok((tape.mean_all(sq)?, ()))
    })?;
    grads.scale(1.0 / items.len() as f64);
    adam.update(&mut value.params, &grads, lr);
    Ok(losses.iter().map(|(l, _)| l).sum::<f64>() / items.len() as f64)
}

/// Exponential moving averages of the reward mean and second moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub decay: f64,
    pub mean: f64,
    pub second_moment: f64,
    /// Whether any batch has been seen; the first batch sets the averages.
    pub initialized: bool,
}

pub const WHITENING_STD_FLOOR: f64 = 1e-6;

impl RewardStats {
    pub fn new(decay: f64) -> Self {
        Self { decay, mean: 0.0, second_moment: 0.0, initialized: false }
    }

    pub fn std(&self) -> f64 {
        (self.second_moment - self.mean * self.mean).max(0.0).sqrt().max(WHITENING_STD_FLOOR)
    }

    /// Folds `rewards` into the averages, then whitens them.
    pub fn whiten(&mut self, rewards: &[f64]) -> Vec<f64> {
        if rewards.is_empty() {
            return Vec::new();
        }
        let count = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / count;
        let second = rewards.iter().map(|r| r * r).sum::<f64>() / count;
        if self.initialized {
            self.mean = self.decay * self.mean + (1.0 - self.decay) * mean;
            self.second_moment = self.decay * self.second_moment + (1.0 - self.decay) * second;
        } else {
            self.mean = mean;
            self.second_moment = second;
            self.initialized = true;
        }
        let std = self.std();
        rewards.iter().map(|r| (r - self.mean) / std).collect()
    }
}

/// Baselined rewards-to-go `g_{j,t} = r_j - v_{j,t}` for `t = 0..T-1`.
pub fn rewards_to_go(rewards: &[f64], values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rewards.iter().zip(values).map(|(r, v)| v.iter().map(|vt| r - vt).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// Clipped surrogate `sum_{j,t} max(-u g, -clamp(u) g)` before the update.
    pub loss: f64,
    pub mean_ratio: f64,
    /// Fraction of ratios outside `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
}

/// `N_epoch` Adam steps on the clipped surrogate. The step `t` term of
/// rollout `j` uses the ratio `u = exp(l1 - l)` of its negative
/// log-likelihoods under the frozen pre-update weights and the current ones,
/// and the advantage `g_{j,t-1}`.
pub fn ppo_update(
    model: &mut AnfmModel,
    adam: &mut Adam,
    sequences: &[SequenceInputs],
    advantages: &[Vec<f64>],
    cfg: &GanConfig,
) -> Result<Vec<EpochStats>, ModelError> {
    if sequences.len() != advantages.len() || sequences.is_empty() {
        return Err(ModelError::InvalidInput("ppo needs one advantage row per rollout".into()));
    }
    // Frozen l^(1): the same computation as the first epoch, so u = 1 exactly there.
    let frozen: Vec<Vec<f64>> = sequences
        .iter()
        .map(|s| Ok(model.sequence_log_likelihood(s)?.per_step.iter().map(|l| -l).collect()))
        .collect::<Result<_, ModelError>>()?;
    let items: Vec<(&SequenceInputs, &Vec<f64>, &Vec<f64>)> =
        sequences.iter().zip(&frozen).zip(advantages).map(|((s, l1), g)| (s, l1, g)).collect();
    let (lo, hi) = (1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    let mut stats = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let m = &*model;
        let (parts, grads) = batch_gradients(&m.params, &items, |tape, &(inputs, l1, g)| {
            let per_step = m.log_likelihood_vars(tape, inputs)?.per_step;
            let l1 = tape.constant(Tensor::new(vec![l1.len()], l1.clone())?)?;
            let neg_g = tape.constant(Tensor::new(vec![g.len()], g.iter().map(|x| -x).collect())?)?;
            let log_u = tape.add(per_step, l1)?;
            let u = tape.exp(log_u)?;
            let unclipped = tape.mul(u, neg_g)?;
            let clipped = tape.clamp(u, lo, hi)?;
            let clipped = tape.mul(clipped, neg_g)?;
            let worst = tape.maximum(unclipped, clipped)?;
            let ratios = tape.value(u).data.clone();
            Ok((tape.sum_all(worst)?, ratios))
        })
        .map_err(|e| match e {
            ModelError::Tensor(t) => ModelError::NumericFailure(format!("ppo ratio: {t}")),
            other => other,
        })?;
        let ratios: Vec<f64> = parts.iter().flat_map(|(_, u)| u.iter().copied()).collect();
        if ratios.iter().any(|u| !u.is_finite()) {
            return Err(ModelError::NumericFailure("non-finite ppo ratio".into()));
        }
        let loss: f64 = parts.iter().map(|(l, _)| l).sum();
        let count = ratios.len() as f64;
        stats.push(EpochStats {
            loss,
            mean_ratio: ratios.iter().sum::<f64>() / count,
            clip_fraction: ratios.iter().filter(|&&u| u < lo || u > hi).count() as f64 / count,
        });
        adam.update(&mut model.params, &grads, cfg.lr);
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Mean clamped reward before whitening.
    pub mean_reward: f64,
    pub value_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub disc: DiscReport,
}

/// Generator, discriminator and value model with their optimizers.
#[derive(Clone, Debug)]
pub struct GanState {
    pub config: GanConfig,
    pub generator: AnfmModel,
    pub gen_adam: Adam,
    pub disc: Discriminator,
    pub disc_adam: Adam,
    pub value: ValueModel,
    pub value_adam: Adam,
    pub rewards: RewardStats,
    pub rng: ChaCha8Rng,
    pub iteration: usize,
    /// Whether the discriminator and value model have been pre-trained.
    pub pretrained: bool,
}

impl GanState {
    pub fn new(generator: AnfmModel, config: GanConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let disc = Discriminator::new(config.disc_hidden, config.disc_layers, derive_seed(config.seed, 1));
        let value = ValueModel::new(&generator.config, derive_seed(config.seed, 2))?;
        Ok(Self {
            gen_adam: Adam::new(&generator.params),
            disc_adam: Adam::new(&disc.params),
            value_adam: Adam::new(&value.params),
            rewards: RewardStats::new(config.ema_decay),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            iteration: 0,
            pretrained: false,
            config,
            generator,
            disc,
            value,
        })
    }

    /// Rollouts with node counts drawn from the data.
    fn rollouts(&mut self, data: &[Graph], count: usize) -> Result<Vec<Rollout>, ModelError> {
        let sizes: Vec<usize> = (0..count).map(|_| data[self.rng.random_range(0..data.len())].n()).collect();
        let seed = self.rng.random();
        sample_many(&self.generator, &sizes, seed, self.config.mode)
    }

    pub fn train_discriminator(&mut self, data: &[Graph], steps: usize) -> Result<DiscReport, ModelError> {
        let mut report = DiscReport { loss: f64::NAN, accuracy: f64::NAN };
        for _ in 0..steps {
            let b = self.config.disc_batch;
            let fake: Vec<Graph> = self.rollouts(data, b)?.iter().map(Rollout::final_graph).collect();
            let real: Vec<Graph> = (0..b).map(|_| data[self.rng.random_range(0..data.len())].clone()).collect();
            report = discriminator_step(&mut self.disc, &mut self.disc_adam, &real, &fake, self.config.disc_lr)?;
        }
        Ok(report)
    }

    /// Clamped terminal rewards of the final graphs.
    fn grade(&self, rollouts: &[Rollout]) -> Result<Vec<f64>, ModelError> {
        rollouts.iter().map(|r| terminal_reward(&self.disc, &r.final_graph(), self.config.reward_floor)).collect()
    }

    /// Pre-trains the discriminator, then the value model on graded rollouts.
    pub fn pretrain(&mut self, data: &[Graph]) -> Result<(), ModelError> {
        check_data(data)?;
        self.train_discriminator(data, self.config.disc_pretrain_steps)?;
        let rollouts = self.rollouts(data, self.config.samples)?;
        let raw = self.grade(&rollouts)?;
        let rewards = self.rewards.whiten(&raw);
        let inputs = rollouts.iter().map(Rollout::inputs).collect::<Result<Vec<_>, _>>()?;
        for _ in 0..self.config.value_pretrain_steps {
            value_step(&mut self.value, &mut self.value_adam, &inputs, &rewards, self.config.value_lr)?;
        }
        self.pretrained = true;
        Ok(())
    }

    /// One pass of rollout, whitening, baselining, value regression, PPO and
    /// discriminator training.
    pub fn iterate(&mut self, data: &[Graph]) -> Result<IterationReport, ModelError> {
        check_data(data)?;
        let rollouts = self.rollouts(data, self.config.samples)?;
        let raw = self.grade(&rollouts)?;
        let rewards = self.rewards.whiten(&raw);
        let inputs = rollouts.iter().map(Rollout::inputs).collect::<Result<Vec<_>, _>>()?;
        let values = inputs.iter().map(|s| self.value.values(s)).collect::<Result<Vec<_>, _>>()?;
        let advantages = rewards_to_go(&rewards, &values);
        let mut value_loss = f64::NAN;
        for _ in 0..self.config.value_steps {
            value_loss = value_step(&mut self.value, &mut self.value_adam, &inputs, &rewards, self.config.value_lr)?;
        }
        let epochs = ppo_update(&mut self.generator, &mut self.gen_adam, &inputs, &advantages, &self.config)?;
        let disc = self.train_discriminator(data, self.config.disc_steps)?;
        self.iteration += 1;
        Ok(IterationReport {
            iteration: self.iteration,
            mean_reward: raw.iter().sum::<f64>() / raw.len() as f64,
            value_loss,
            epochs,
            disc,
        })
    }

    /// Pre-trains if needed, then iterates until `config.iterations`.
    pub fn run(
        &mut self,
        data: &[Graph],
        mut on_iteration: impl FnMut(&GanState, &IterationReport) -> Result<(), ModelError>,
    ) -> Result<(), ModelError> {
        if self.iteration >= self.config.iterations {
            return Ok(());
        }
        if !self.pretrained {
            self.pretrain(data)?;
        }
        while self.iteration < self.config.iterations {
            let report = self.iterate(data)?;
            on_iteration(self, &report)?;
        }
        Ok(())
    }
}

fn check_data(data: &[Graph]) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::InvalidInput("stage II needs training graphs".into()));
    }
    Ok(())
}
