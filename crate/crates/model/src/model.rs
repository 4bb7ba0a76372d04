use anfm_graph::NoisySequence;
use anfm_tensor::{ParamStore, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backbone::Backbone;
use crate::config::ModelConfig;
use crate::decoder::EdgeDecoder;
use crate::inputs::SequenceInputs;
use crate::likelihood::EdgeDistribution;
use crate::ModelError;

/// The generator: backbone plus edge decoder, with its parameters.
#[derive(Clone, Debug)]
pub struct AnfmModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub(crate) backbone: Backbone,
    pub(crate) decoder: EdgeDecoder,
}

/// Differentiable outputs of one teacher-forced pass.
#[derive(Clone, Copy, Debug)]
pub struct LikelihoodVars {
    /// Scalar `ln p(G~_1..G~_T | G~_0)`.
    pub total: Var,
    /// `(T,)` per-step conditional log-likelihoods.
    pub per_step: Var,
    /// `(T, K, n, n)` edge log-odds.
    pub logits: Var,
    /// `(T, K)` log mixture weights.
    pub log_pi: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceLogLik {
    pub total: f64,
    pub per_step: Vec<f64>,
}

impl AnfmModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::new();
        let backbone = Backbone::new(&mut params, "backbone", &config, &mut rng);
        let decoder = EdgeDecoder::new(&mut params, "decoder", config.hidden, config.components, &mut rng);
        Ok(Self { config, params, backbone, decoder })
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn decoder(&self) -> &EdgeDecoder {
        &self.decoder
    }

    fn check(&self, inputs: &SequenceInputs) -> Result<(), ModelError> {
        if inputs.n == 0 {
            return Err(ModelError::InvalidInput("graphs need at least one node".into()));
        }
        if inputs.n > self.config.max_nodes {
            return Err(ModelError::TooManyNodes { n: inputs.n, max: self.config.max_nodes });
        }
        Ok(())
    }

    /// Records the teacher-forced log-likelihood of a sequence on `tape`.
    pub fn log_likelihood_vars(&self, tape: &mut Tape, inputs: &SequenceInputs) -> Result<LikelihoodVars, ModelError> {
        self.check(inputs)?;
        let h = self.backbone.forward(tape, &self.params, inputs)?;
        let logits = self.decoder.edge_logits(tape, &self.params, h)?;
        let log_pi = self.decoder.log_mixture(tape, &self.params, h)?;
        let component = tape.pairwise_bernoulli_loglik(logits, &inputs.targets)?;
        let joint = tape.add(log_pi, component)?;
        let per_step = tape.logsumexp(joint)?;
        let total = tape.sum_all(per_step)?;
        Ok(LikelihoodVars { total, per_step, logits, log_pi })
    }

    pub fn sequence_log_likelihood(&self, inputs: &SequenceInputs) -> Result<SequenceLogLik, ModelError> {
        let mut tape = Tape::inference();
        let vars = self.log_likelihood_vars(&mut tape, inputs)?;
        Ok(SequenceLogLik { total: tape.value(vars.total).item(), per_step: tape.value(vars.per_step).data.clone() })
    }

    pub fn noisy_sequence_log_likelihood(&self, seq: &NoisySequence) -> Result<SequenceLogLik, ModelError> {
        self.sequence_log_likelihood(&SequenceInputs::from_noisy(seq)?)
    }

    /// The predicted distribution of `G~_{t+1}` for every step `t`.
    pub fn edge_distributions(&self, inputs: &SequenceInputs) -> Result<Vec<EdgeDistribution>, ModelError> {
        let mut tape = Tape::inference();
        let vars = self.log_likelihood_vars(&mut tape, inputs)?;
        let (logits, log_pi) = (tape.value(vars.logits), tape.value(vars.log_pi));
        let (n, k) = (inputs.n, self.config.components);
        Ok((0..inputs.steps)
            .map(|t| EdgeDistribution {
                n,
                log_pi: log_pi.data[t * k..(t + 1) * k].to_vec(),
                logits: logits.data[t * k * n * n..(t + 1) * k * n * n].to_vec(),
            })
            .collect())
    }
}
