use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Whether temporal mixing attends over all earlier steps or only applies
/// the per-step feed-forward block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalMode {
    Causal,
    FirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Width `D` of node representations.
    pub hidden: usize,
    /// Number of structural + temporal mixing blocks.
    pub layers: usize,
    /// Mixture components `K` of the edge decoder.
    pub components: usize,
    /// Generation steps `T`.
    pub steps: usize,
    /// Rows of the positional embedding table; the largest trainable graph.
    pub max_nodes: usize,
    pub temporal: TemporalMode,
    /// Hidden width of feed-forward blocks as a multiple of `hidden`.
    pub ffn_mult: usize,
    /// Seed of the weight initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            layers: 5,
            components: 4,
            steps: 15,
            max_nodes: 64,
            temporal: TemporalMode::Causal,
            ffn_mult: 2,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Planar graphs with the line Fiedler filtration.
    pub fn planar() -> Self {
        Self { steps: 30, components: 8, max_nodes: 64, ..Self::default() }
    }

    /// Planar graphs with the DFS filtration.
    pub fn planar_dfs() -> Self {
        Self { steps: 32, components: 8, max_nodes: 64, ..Self::default() }
    }

    /// SBM graphs with the line Fiedler filtration.
    pub fn sbm() -> Self {
        Self { steps: 15, components: 4, max_nodes: 200, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.hidden < 2 || !self.hidden.is_multiple_of(2) {
            return bad("hidden must be an even number >= 2");
        }
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.components == 0 {
            return bad("components must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.max_nodes == 0 {
            return bad("max_nodes must be at least 1");
        }
        if self.ffn_mult == 0 {
            return bad("ffn_mult must be at least 1");
        }
        Ok(())
    }
}
