//! `HGNET` checkpoints: magic, version, a JSON header, then raw little-endian f32
//! tensors in header order.

use std::path::Path;

use hourglass_core::dataset::JointLayout;
use hourglass_core::model::{ModelConfig, StackedModelParams};
use hourglass_core::optim::RmsPropState;
use hourglass_core::training::{TrainConfig, TrainState, Trainer};
use hourglass_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, IoError, Result};

pub const MAGIC: &[u8; 5] = b"HGNET";
pub const VERSION: u32 = 1;

const PARAM_PREFIX: &str = "param/";
const OPT_PREFIX: &str = "opt/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub kind: String,
    pub learning_rate: f64,
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub layout: Option<JointLayout>,
    pub train: Option<TrainConfig>,
    pub optimizer: Option<OptimizerInfo>,
    pub iteration: u64,
    /// Loop state including the random stream position.
    pub state: Option<TrainState>,
    pub tensors: Vec<TensorInfo>,
    /// FNV-1a 64 of the tensor payload.
    pub payload_checksum: u64,
}

/// Model plus, for resumable checkpoints, optimizer moments and loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: StackedModelParams<f32>,
    pub layout: Option<JointLayout>,
    pub train: Option<TrainConfig>,
    pub optimizer: Option<RmsPropState<f32>>,
    pub state: Option<TrainState>,
}

impl Checkpoint {
    pub fn from_model(model: StackedModelParams<f32>, layout: Option<JointLayout>) -> Self {
        Self {
            model,
            layout,
            train: None,
            optimizer: None,
            state: None,
        }
    }

    pub fn from_trainer(trainer: &Trainer, layout: Option<JointLayout>) -> Self {
        Self {
            model: trainer.model.clone(),
            layout,
            train: Some(trainer.config.clone()),
            optimizer: Some(trainer.optimizer.clone()),
            state: Some(trainer.snapshot()),
        }
    }

    /// Rebuilds a trainer that continues exactly where this checkpoint stopped.
    pub fn into_trainer(self, flip_perm: Vec<usize>) -> hourglass_core::Result<Trainer> {
        let (Some(train), Some(optimizer), Some(state)) = (self.train, self.optimizer, self.state)
        else {
            return Err(hourglass_core::Error::InvalidConfig(
                "checkpoint has no training state to resume from".into(),
            ));
        };
        Trainer::resume(self.model, train, optimizer, state, flip_perm)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn trainable_names(model: &StackedModelParams<f32>) -> Vec<&str> {
    model
        .store
        .entries()
        .iter()
        .filter(|e| e.kind.trainable())
        .map(|e| e.name.as_str())
        .collect()
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    let mut push = |name: String, shape: &[usize], data: &[f32]| {
        tensors.push(TensorInfo {
            name,
            shape: shape.to_vec(),
        });
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    };
    for e in ckpt.model.store.entries() {
        push(
            format!("{PARAM_PREFIX}{}", e.name),
            e.tensor.shape(),
            e.tensor.data(),
        );
    }
    if let Some(opt) = &ckpt.optimizer {
        for (name, s) in trainable_names(&ckpt.model)
            .into_iter()
            .zip(&opt.square_avg)
        {
            push(format!("{OPT_PREFIX}{name}"), &[s.len()], s);
        }
    }
    let header = CheckpointHeader {
        model: ckpt.model.config.clone(),
        layout: ckpt.layout.clone(),
        train: ckpt.train.clone(),
        optimizer: ckpt.train.as_ref().map(|t| OptimizerInfo {
            kind: "rmsprop".into(),
            learning_rate: ckpt
                .state
                .as_ref()
                .map_or(t.learning_rate, |s| s.learning_rate),
            alpha: t.rmsprop_alpha,
            eps: t.rmsprop_eps,
        }),
        iteration: ckpt.state.as_ref().map_or(0, |s| s.iteration),
        state: ckpt.state.clone(),
        tensors,
        payload_checksum: fnv1a(&payload),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 12 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let corrupt = |message: String| IoError::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 17 || &bytes[..5] != MAGIC {
        return Err(corrupt("missing HGNET magic".into()));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes")) as usize;
    let body = &bytes[17..];
    if header_len > body.len() {
        return Err(corrupt(format!(
            "header length {header_len} exceeds file size"
        )));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&body[..header_len]).map_err(|e| corrupt(format!("header: {e}")))?;
    let payload = &body[header_len..];
    let expected: usize = header
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>() * 4)
        .sum();
    if payload.len() != expected {
        return Err(corrupt(format!(
            "payload has {} bytes, header describes {expected}",
            payload.len()
        )));
    }
    if fnv1a(payload) != header.payload_checksum {
        return Err(corrupt("payload checksum mismatch".into()));
    }
    let mut model =
        StackedModelParams::<f32>::init(&header.model, 0).map_err(|e| corrupt(e.to_string()))?;
    let names: Vec<String> = trainable_names(&model)
        .into_iter()
        .map(String::from)
        .collect();
    let mut square_avg: Vec<Option<Vec<f32>>> = vec![None; names.len()];
    let mut loaded = vec![false; model.store.len()];
    let mut offset = 0;
    for t in &header.tensors {
        let n: usize = t.shape.iter().product();
        let data: Vec<f32> = payload[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        offset += 4 * n;
        if let Some(name) = t.name.strip_prefix(PARAM_PREFIX) {
            let id = model
                .store
                .find(name)
                .ok_or_else(|| corrupt(format!("unknown parameter {name}")))?;
            if model.store.get(id).shape() != t.shape.as_slice() {
                return Err(corrupt(format!("parameter {name} has shape {:?}", t.shape)));
            }
            *model.store.get_mut(id) =
                Tensor::new(t.shape.clone(), data).map_err(|e| corrupt(e.to_string()))?;
            loaded[id.index()] = true;
        } else if let Some(name) = t.name.strip_prefix(OPT_PREFIX) {
            let i = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| corrupt(format!("optimizer state for unknown parameter {name}")))?;
            square_avg[i] = Some(data);
        } else {
            return Err(corrupt(format!("unknown tensor {}", t.name)));
        }
    }
    if let Some(i) = loaded.iter().position(|&l| !l) {
        return Err(corrupt(format!(
            "missing parameter {}",
            model.store.entries()[i].name
        )));
    }
    let optimizer = if square_avg.iter().all(Option::is_none) {
        None
    } else {
        let s: Option<Vec<Vec<f32>>> = square_avg.into_iter().collect();
        Some(RmsPropState {
            square_avg: s.ok_or_else(|| corrupt("optimizer state is incomplete".into()))?,
        })
    };
    Ok(Checkpoint {
        model,
        layout: header.layout,
        train: header.train,
        optimizer,
        state: header.state,
    })
}

/// Writes atomically through a temporary sibling file.
pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("hgnet.tmp");
    std::fs::write(&tmp, to_bytes(ckpt)).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    from_bytes(&bytes, path)
}
