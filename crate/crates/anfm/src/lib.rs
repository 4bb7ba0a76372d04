//! Graph generation from noisy filtration sequences: the run configuration,
//! pipeline helpers shared by the command-line tool and the acceptance
//! harness, and re-exports of the component crates.

pub mod cli;
pub mod config;
pub mod pipeline;

pub use anfm_eval as eval;
pub use anfm_graph as graph;
pub use anfm_model as model;
pub use anfm_tensor as tensor;

pub use config::{DatasetSection, EvalSection, FiltrationSection, RunConfig};
pub use pipeline::{
    density_matched_er, empirical_sizes, evaluate, load_generator, sample_graphs, train_stage1, training_sequences,
    Stage1Outcome,
};

/// Failures grouped by the exit code the command-line tool reports.
#[derive(Debug, thiserror::Error)]
pub enum AnfmError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl AnfmError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AnfmError::Config(_) => 2,
            AnfmError::Data(_) => 3,
            AnfmError::Numeric(_) => 4,
        }
    }
}

impl From<anfm_model::ModelError> for AnfmError {
    fn from(e: anfm_model::ModelError) -> Self {
        use anfm_model::ModelError as M;
        match e {
            M::InvalidConfig(m) => AnfmError::Config(m),
            M::NumericFailure(_) | M::Tensor(_) => AnfmError::Numeric(e.to_string()),
            other => AnfmError::Data(other.to_string()),
        }
    }
}

impl From<anfm_eval::EvalError> for AnfmError {
    fn from(e: anfm_eval::EvalError) -> Self {
        match e {
            anfm_eval::EvalError::Model(m) => m.into(),
            anfm_eval::EvalError::InvalidArgument(m) => AnfmError::Config(m),
            other => AnfmError::Data(other.to_string()),
        }
    }
}

impl From<anfm_graph::datasets::DatasetError> for AnfmError {
    fn from(e: anfm_graph::datasets::DatasetError) -> Self {
        match e {
            anfm_graph::datasets::DatasetError::InvalidSpec(m) => AnfmError::Config(format!("dataset: {m}")),
            other => AnfmError::Data(other.to_string()),
        }
    }
}

impl From<anfm_model::CheckpointError> for AnfmError {
    fn from(e: anfm_model::CheckpointError) -> Self {
        AnfmError::Data(e.to_string())
    }
}

impl From<std::io::Error> for AnfmError {
    fn from(e: std::io::Error) -> Self {
        AnfmError::Data(e.to_string())
    }
}
