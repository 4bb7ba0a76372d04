//! The TOML run configuration. Every command resolves one and writes it
//! beside its outputs as `config.toml`.

use std::path::{Path, PathBuf};

use anfm_eval::DescriptorKind;
use anfm_graph::datasets::{DatasetSpec, Family, LobsterParams, PlanarParams, SbmParams};
use anfm_graph::{derive_seed, FiltrationConfig, FiltrationFunction, LambdaSchedule, Schedule};
use anfm_model::{GanConfig, ModelConfig, SampleMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::AnfmError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub family: Family,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub planar: PlanarParams,
    pub sbm: SbmParams,
    pub lobster: LobsterParams,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let spec = DatasetSpec::new(Family::Planar, 0);
        Self {
            family: spec.family,
            train: spec.train,
            val: spec.val,
            test: spec.test,
            planar: spec.planar,
            sbm: spec.sbm,
            lobster: spec.lobster,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiltrationSection {
    pub function: FiltrationFunction,
    /// Defaults to the schedule that matches `function`.
    pub schedule: Option<Schedule>,
    pub node_jitter: f64,
}

impl Default for FiltrationSection {
    fn default() -> Self {
        Self { function: FiltrationFunction::LineFiedler, schedule: None, node_jitter: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Graphs drawn by `sample` and scored by `eval`.
    pub samples: usize,
    pub mode: SampleMode,
    /// Fixed node count; `None` draws sizes from the training graphs.
    pub nodes: Option<usize>,
    pub kinds: Vec<DescriptorKind>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { samples: 256, mode: SampleMode::Stochastic, nodes: None, kinds: DescriptorKind::ALL.to_vec() }
    }
}

/// Component seeds (`model.init_seed`, `train.seed`, `finetune.seed`) are
/// derived from `seed` by [`RunConfig::resolve`]; the dataset uses `seed`
/// directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub dataset: DatasetSection,
    pub filtration: FiltrationSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub finetune: GanConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("anfm-out"),
            dataset: DatasetSection::default(),
            filtration: FiltrationSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            finetune: GanConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

fn section<E: std::fmt::Display>(name: &str) -> impl Fn(E) -> AnfmError + '_ {
    move |e| AnfmError::Config(format!("{name}: {e}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, AnfmError> {
        toml::from_str(text).map_err(|e| AnfmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AnfmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnfmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Writes the resolved config into `dir` as `config.toml`.
    pub fn write_beside(&self, dir: &Path) -> Result<(), AnfmError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), self.to_toml())?;
        Ok(())
    }

    /// Fills the component seeds from `seed` and checks every section.
    pub fn resolve(mut self) -> Result<Self, AnfmError> {
        self.model.init_seed = derive_seed(self.seed, 1);
        self.train.seed = derive_seed(self.seed, 2);
        self.finetune.seed = derive_seed(self.seed, 3);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AnfmError> {
        self.dataset_spec().validate().map_err(section("dataset"))?;
        self.filtration_config().validate().map_err(section("filtration"))?;
        self.model.validate().map_err(section("model"))?;
        self.train.validate().map_err(section("train"))?;
        self.finetune.validate().map_err(section("finetune"))?;
        if self.eval.samples == 0 {
            return Err(AnfmError::Config("eval.samples must be positive".into()));
        }
        if self.eval.nodes == Some(0) {
            return Err(AnfmError::Config("eval.nodes must be positive".into()));
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let d = &self.dataset;
        DatasetSpec {
            family: d.family,
            train: d.train,
            val: d.val,
            test: d.test,
            seed: self.seed,
            planar: d.planar.clone(),
            sbm: d.sbm.clone(),
            lobster: d.lobster.clone(),
        }
    }

    /// Filtration over `model.steps` steps; per-sequence seeds are assigned
    /// when training sequences are materialized.
    pub fn filtration_config(&self) -> FiltrationConfig {
        let f = &self.filtration;
        let mut config = FiltrationConfig::new(f.function, self.model.steps).with_seed(derive_seed(self.seed, 4));
        if let Some(schedule) = f.schedule {
            config = config.with_schedule(schedule);
        }
        config.node_jitter = f.node_jitter;
        config
    }

    pub fn lambda(&self) -> LambdaSchedule {
        self.train.lambda
    }

    /// Seed of the rollouts drawn by `sample`.
    pub fn sample_seed(&self) -> u64 {
        derive_seed(self.seed, 5)
    }
}
