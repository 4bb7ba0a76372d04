//! Graph representation and everything that turns a graph into a training
//! sequence: classical algorithms, spectral features, filtrations with noise
//! augmentation, and the synthetic dataset families.

pub mod algo;
pub mod datasets;
pub mod filtration;
pub mod graph;
pub mod planarity;
pub mod spectral;
pub mod wl;

pub use algo::{dfs_ordering, edge_betweenness, is_connected, is_lobster, line_graph};
pub use filtration::{
    build_filtration, derived_node_ordering, edge_weights, noise_augment, thresholds, EdgeWeights, FiltrationConfig,
    FiltrationFunction, FiltrationSequence, LambdaSchedule, NoisySequence, Schedule,
};
pub use graph::{Edge, Graph, NodeOrdering};
pub use planarity::is_planar;
pub use spectral::{
    eigh, fiedler_vector, node_features, sym_normalized_laplacian, EigenPairs, NodeFeatures, SymMatrix,
};
pub use wl::{wl_hash, GraphHash};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("ordering is not a permutation")]
    NotAPermutation,
    #[error("graph not connected")]
    NotConnected,
    #[error("graph has no edges")]
    NoEdges,
    #[error("Fiedler undefined: graph is disconnected or has fewer than two nodes")]
    FiedlerUndefined,
    #[error("matrix is not symmetric (entry ({0}, {1}))")]
    NotSymmetric(usize, usize),
    #[error("DFS filtration needs a node ordering")]
    MissingOrdering,
    #[error("invalid filtration config: {0}")]
    InvalidConfig(String),
}

/// Mixes a base seed with a stream index (splitmix64 finalizer), used for
/// per-graph and per-rollout generators.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
