//! Evaluation of generated graphs: descriptor histograms and orbit counts,
//! the biased MMD estimator, validity/uniqueness/novelty, the statistics of
//! these estimators, and sampling-time benchmarks.

pub mod bench;
pub mod descriptors;
pub mod mmd;
pub mod report;
pub mod study;
pub mod vun;

pub use bench::{bench_sampling, fit_quadratic, BenchRow, Quadratic};
pub use descriptors::{descriptor_sets, orbit_counts, Descriptor, DescriptorKind, ORBITS};
pub use mmd::{mmd2, Kernel, MmdResult};
pub use report::{compare, EvalReport, KindMmd};
pub use study::{estimator_study, validity_std_monte_carlo, StudyRow};
pub use vun::{validity_std, vun, VunReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty sample set: {0}")]
    Empty(String),
    #[error("insufficient samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] anfm_model::ModelError),
}
