//! Structured evaluation output.

use std::time::Instant;

use anfm_graph::Graph;
use serde::{Deserialize, Serialize};

use crate::descriptors::{descriptor_sets, DescriptorKind};
use crate::mmd::{mmd2, Kernel, MmdResult};
use crate::vun::VunReport;
use crate::EvalError;

const KERNEL_NOTE: &str = "kernel bandwidths and histogram binning are conventional settings, not tuned values";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindMmd {
    pub kind: DescriptorKind,
    pub mmd: MmdResult,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub reference: usize,
    pub mmd: Vec<KindMmd>,
    /// Descriptor MMDs of the training set against the same reference.
    pub baseline: Option<Vec<KindMmd>>,
    pub vun: Option<VunReport>,
    pub seed: Option<u64>,
    /// Mean sampling seconds per graph, when the samples were generated here.
    pub sampling_seconds_per_graph: Option<f64>,
    pub kernel_note: String,
    /// Free-form settings of the run that produced the samples.
    pub settings: serde_json::Value,
}

impl EvalReport {
    pub fn new(samples: usize, reference: usize, mmd: Vec<KindMmd>) -> Self {
        Self {
            samples,
            reference,
            mmd,
            baseline: None,
            vun: None,
            seed: None,
            sampling_seconds_per_graph: None,
            kernel_note: KERNEL_NOTE.into(),
            settings: serde_json::Value::Null,
        }
    }

    pub fn mmd_of(&self, kind: DescriptorKind) -> Option<f64> {
        self.mmd.iter().find(|m| m.kind == kind).map(|m| m.mmd.value)
    }
}

/// MMD between `samples` and `reference` for each requested descriptor.
pub fn compare(samples: &[Graph], reference: &[Graph], kinds: &[DescriptorKind]) -> Result<Vec<KindMmd>, EvalError> {
    if samples.is_empty() || reference.is_empty() {
        return Err(EvalError::Empty("compare needs generated and reference graphs".into()));
    }
    kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let (x, y) = descriptor_sets(kind, samples, reference);
            let mmd = mmd2(&x, &y, Kernel::for_kind(kind))?;
            Ok(KindMmd { kind, mmd, seconds: start.elapsed().as_secs_f64() })
        })
        .collect()
}
