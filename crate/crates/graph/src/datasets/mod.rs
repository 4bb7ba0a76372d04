//! Synthetic graph families, their validity predicates and on-disk formats.

mod generate;
mod io;
mod valid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use generate::{delaunay_graph, random_lobster, sample_family, sbm_graph};
pub use io::{load_gds, load_jsonl, read_gds, save_gds, save_jsonl, write_gds, DatasetError, GDS_MAGIC, GDS_VERSION};
pub use valid::{greedy_modularity_communities, planted_partition_communities, sbm_valid, valid};

use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Planar,
    Sbm,
    Lobster,
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planar" => Ok(Family::Planar),
            "sbm" => Ok(Family::Sbm),
            "lobster" => Ok(Family::Lobster),
            other => Err(format!("unknown family '{other}' (expected planar, sbm or lobster)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanarParams {
    pub points: usize,
}

impl Default for PlanarParams {
    fn default() -> Self {
        Self { points: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmParams {
    pub min_communities: usize,
    pub max_communities: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub p_intra: f64,
    pub p_inter: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self { min_communities: 2, max_communities: 5, min_size: 20, max_size: 40, p_intra: 0.3, p_inter: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LobsterParams {
    /// Backbone length is drawn uniformly from `[0, 2 * mean_backbone]`.
    pub mean_backbone: f64,
    pub p1: f64,
    pub p2: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for LobsterParams {
    fn default() -> Self {
        Self { mean_backbone: 80.0, p1: 0.7, p2: 0.7, min_nodes: 10, max_nodes: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub family: Family,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    #[serde(default)]
    pub planar: PlanarParams,
    #[serde(default)]
    pub sbm: SbmParams,
    #[serde(default)]
    pub lobster: LobsterParams,
}

impl DatasetSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            train: 8192,
            val: 256,
            test: 256,
            seed,
            planar: PlanarParams::default(),
            sbm: SbmParams::default(),
            lobster: LobsterParams::default(),
        }
    }

    pub fn with_counts(mut self, train: usize, val: usize, test: usize) -> Self {
        self.train = train;
        self.val = val;
        self.test = test;
        self
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| Err(DatasetError::InvalidSpec(msg));
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return bad("train, val and test counts must be at least 1".into());
        }
        let s = &self.sbm;
        if s.min_communities == 0 || s.min_communities > s.max_communities || s.min_size == 0 || s.min_size > s.max_size
        {
            return bad("sbm community ranges are empty".into());
        }
        let l = &self.lobster;
        if l.min_nodes > l.max_nodes || l.mean_backbone <= 0.0 {
            return bad("lobster size window is empty".into());
        }
        for p in [s.p_intra, s.p_inter, l.p1, l.p2] {
            if !(0.0..1.0).contains(&p) && p != 1.0 {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if l.p1 >= 1.0 || l.p2 >= 1.0 {
            return bad("lobster attachment probabilities must be below 1".into());
        }
        if self.planar.points < 3 {
            return bad("planar graphs need at least 3 points".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphRecord {
    pub graph: Graph,
    pub family: Family,
    /// Position in the concatenated train/val/test stream.
    pub index: usize,
    /// Seed of the generator that produced this graph.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Vec<GraphRecord>,
    pub val: Vec<GraphRecord>,
    pub test: Vec<GraphRecord>,
}

impl Dataset {
    pub fn train_graphs(&self) -> Vec<Graph> {
        self.train.iter().map(|r| r.graph.clone()).collect()
    }

    pub fn val_graphs(&self) -> Vec<Graph> {
        self.val.iter().map(|r| r.graph.clone()).collect()
    }

    pub fn test_graphs(&self) -> Vec<Graph> {
        self.test.iter().map(|r| r.graph.clone()).collect()
    }
}

/// Generates all splits; graph `i` uses a generator seeded from `(seed, i)`,
/// so the result does not depend on the thread count.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let total = spec.train + spec.val + spec.test;
    let records: Vec<GraphRecord> = (0..total)
        .into_par_iter()
        .map(|index| {
            let seed = crate::derive_seed(spec.seed, index as u64);
            let graph = sample_family(spec, seed)?;
            Ok(GraphRecord { graph, family: spec.family, index, seed })
        })
        .collect::<Result<_, DatasetError>>()?;
    let mut it = records.into_iter();
    let train = it.by_ref().take(spec.train).collect();
    let val = it.by_ref().take(spec.val).collect();
    let test = it.collect();
    Ok(Dataset { spec: spec.clone(), train, val, test })
}
