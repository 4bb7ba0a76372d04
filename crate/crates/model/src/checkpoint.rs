//! Binary checkpoints: magic `ANFM`, `u32` version, `u64` length plus the
//! canonical JSON config, `u32` tensor count, per tensor (`u32` name length,
//! name, `u8` rank, `u64` dims, little-endian `f64` data), then the ChaCha
//! state (32-byte seed, `u64` stream, `u128` word position).

use std::path::Path;

use anfm_tensor::{Adam, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::ModelConfig;
use crate::finetune::{GanConfig, GanState};
use crate::model::AnfmModel;
use crate::training::{TrainConfig, Trainer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ANFM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected ANFM")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("truncated checkpoint")]
    Truncated,
    #[error("trailing bytes after the checkpoint")]
    TrailingBytes,
    #[error("malformed checkpoint config: {0}")]
    Config(String),
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: Value,
    pub tensors: Vec<(String, Tensor)>,
    pub rng: ChaCha8Rng,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos.checked_add(len).ok_or(CheckpointError::Truncated)?;
        let chunk = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(chunk)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.array().map(u64::from_le_bytes)
    }

    fn len(&mut self) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64()?).map_err(|_| CheckpointError::Truncated)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = self.config.to_string();
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let config_len = r.len()?;
        let text = std::str::from_utf8(r.take(config_len)?).map_err(|e| CheckpointError::Config(e.to_string()))?;
        let config: Value = serde_json::from_str(text).map_err(|e| CheckpointError::Config(e.to_string()))?;
        let count = r.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| CheckpointError::Config(format!("tensor name: {e}")))?;
            let rank = r.array::<1>()?[0] as usize;
            let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(CheckpointError::Truncated)?;
            let raw = r.take(numel.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push((name, Tensor { shape, data }));
        }
        let mut rng = ChaCha8Rng::from_seed(r.array::<32>()?);
        rng.set_stream(r.u64()?);
        rng.set_word_pos(u128::from_le_bytes(r.array::<16>()?));
        if r.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes);
        }
        Ok(Self { config, tensors, rng })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Config field `key`, deserialized.
    pub fn field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T, CheckpointError> {
        let v = self.config.get(key).ok_or_else(|| CheckpointError::Config(format!("missing key '{key}'")))?;
        serde_json::from_value(v.clone()).map_err(|e| CheckpointError::Config(format!("key '{key}': {e}")))
    }

    pub fn kind(&self) -> Result<String, CheckpointError> {
        self.field("kind")
    }

    /// Appends every parameter of `store` under `prefix`.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore) {
        for (_, name, t) in store.iter() {
            self.tensors.push((format!("{prefix}{name}"), t.clone()));
        }
    }

    /// Overwrites every parameter of `store` with the tensor stored under
    /// `prefix`; shapes must match.
    pub fn restore_store(&self, prefix: &str, store: &mut ParamStore) -> Result<(), CheckpointError> {
        for id in store.ids().collect::<Vec<_>>() {
            let name = format!("{prefix}{}", store.name(id));
            let t =
                self.tensor(&name).ok_or_else(|| CheckpointError::Incompatible(format!("missing tensor '{name}'")))?;
            if t.shape != store.get(id).shape {
                return Err(CheckpointError::Incompatible(format!(
                    "tensor '{name}' has shape {:?}, the config expects {:?}",
                    t.shape,
                    store.get(id).shape
                )));
            }
            *store.get_mut(id) = t.clone();
        }
        let expected = self.tensors.iter().filter(|(n, _)| n.starts_with(prefix)).count();
        if expected != store.len() {
            return Err(CheckpointError::Incompatible(format!(
                "{expected} tensors under '{prefix}', the config defines {}",
                store.len()
            )));
        }
        Ok(())
    }

    pub fn push_adam(&mut self, prefix: &str, store: &ParamStore, adam: &Adam) {
        for (id, name, _) in store.iter() {
            self.tensors.push((format!("{prefix}m.{name}"), adam.m[id.0].clone()));
            self.tensors.push((format!("{prefix}v.{name}"), adam.v[id.0].clone()));
        }
    }

    pub fn restore_adam(&self, prefix: &str, store: &ParamStore, step: u64) -> Result<Adam, CheckpointError> {
        let mut adam = Adam::new(store);
        adam.step = step;
        let mut m = ParamStore::new();
        let mut v = ParamStore::new();
        for (_, name, t) in store.iter() {
            m.add(name, t.clone());
            v.add(name, t.clone());
        }
        self.restore_store(&format!("{prefix}m."), &mut m)?;
        self.restore_store(&format!("{prefix}v."), &mut v)?;
        adam.m = m.iter().map(|(_, _, t)| t.clone()).collect();
        adam.v = v.iter().map(|(_, _, t)| t.clone()).collect();
        Ok(adam)
    }
}

/// Generator weights only.
pub fn model_checkpoint(model: &AnfmModel) -> Checkpoint {
    let mut ck = Checkpoint {
        config: json!({ "kind": "model", "model": model.config }),
        tensors: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(model.config.init_seed),
    };
    ck.push_store("gen.", &model.params);
    ck
}

/// Rebuilds the generator of any checkpoint kind.
pub fn model_from_checkpoint(ck: &Checkpoint) -> Result<AnfmModel, CheckpointError> {
    let config: ModelConfig = ck.field("model")?;
    let mut model = AnfmModel::new(config).map_err(|e| CheckpointError::Config(e.to_string()))?;
    ck.restore_store("gen.", &mut model.params)?;
    Ok(model)
}

pub fn trainer_checkpoint(trainer: &Trainer) -> Checkpoint {
    let mut ck = Checkpoint {
        config: json!({
            "kind": "stage1",
            "model": trainer.model.config,
            "train": trainer.config,
            "step": trainer.step,
            "adam_step": trainer.adam.step,
        }),
        tensors: Vec::new(),
        rng: trainer.rng.clone(),
    };
    ck.push_store("gen.", &trainer.model.params);
    ck.push_adam("adam.", &trainer.model.params, &trainer.adam);
    ck
}

pub fn trainer_from_checkpoint(ck: &Checkpoint) -> Result<Trainer, CheckpointError> {
    if ck.kind()? != "stage1" {
        return Err(CheckpointError::Incompatible(format!("expected a stage1 checkpoint, found '{}'", ck.kind()?)));
    }
    let model = model_from_checkpoint(ck)?;
    let config: TrainConfig = ck.field("train")?;
    let adam = ck.restore_adam("adam.", &model.params, ck.field("adam_step")?)?;
    Ok(Trainer { model, config, adam, rng: ck.rng.clone(), step: ck.field("step")? })
}

pub fn gan_checkpoint(state: &GanState) -> Checkpoint {
    let mut ck = Checkpoint {
        config: json!({
            "kind": "stage2",
            "model": state.generator.config,
            "gan": state.config,
            "rewards": state.rewards,
            "iteration": state.iteration,
            "pretrained": state.pretrained,
            "gen_adam_step": state.gen_adam.step,
            "disc_adam_step": state.disc_adam.step,
            "value_adam_step": state.value_adam.step,
        }),
        tensors: Vec::new(),
        rng: state.rng.clone(),
    };
    ck.push_store("gen.", &state.generator.params);
    ck.push_store("disc.", &state.disc.params);
    ck.push_store("value.", &state.value.params);
    ck.push_adam("gen_adam.", &state.generator.params, &state.gen_adam);
    ck.push_adam("disc_adam.", &state.disc.params, &state.disc_adam);
    ck.push_adam("value_adam.", &state.value.params, &state.value_adam);
    ck
}

pub fn gan_from_checkpoint(ck: &Checkpoint) -> Result<GanState, CheckpointError> {
    if ck.kind()? != "stage2" {
        return Err(CheckpointError::Incompatible(format!("expected a stage2 checkpoint, found '{}'", ck.kind()?)));
    }
    let generator = model_from_checkpoint(ck)?;
    let config: GanConfig = ck.field("gan")?;
    let mut state = GanState::new(generator, config).map_err(|e| CheckpointError::Config(e.to_string()))?;
    ck.restore_store("disc.", &mut state.disc.params)?;
    ck.restore_store("value.", &mut state.value.params)?;
    state.gen_adam = ck.restore_adam("gen_adam.", &state.generator.params, ck.field("gen_adam_step")?)?;
    state.disc_adam = ck.restore_adam("disc_adam.", &state.disc.params, ck.field("disc_adam_step")?)?;
    state.value_adam = ck.restore_adam("value_adam.", &state.value.params, ck.field("value_adam_step")?)?;
    state.rewards = ck.field("rewards")?;
    state.iteration = ck.field("iteration")?;
    state.pretrained = ck.field("pretrained")?;
    state.rng = ck.rng.clone();
    Ok(state)
}
