//! Binary checkpoint container.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic "RGANCKPT" | version u32 | header length u32 | header (JSON)
//! tensor count u32 | per tensor: name length u16, name, rank u8, dims u32..., f32 values
//! CRC-32 of everything before it
//! ```

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GanArchitecture, InitSpec};
use super::network::Param;
use super::optim::AdamConfig;
use super::train::{GanConfig, TrainState};
use crate::preprocess::Mode;

pub const MAGIC: &[u8; 8] = b"RGANCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint is incompatible: {0}")]
    VersionMismatch(String),
    #[error("checkpoint is corrupt: {0}")]
    CorruptCheckpoint(String),
}

fn corrupt(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::CorruptCheckpoint(msg.into())
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: String,
    mode: String,
    batch_size: usize,
    total_iterations: u64,
    seed: u64,
    checkpoint_every: u64,
    init: [f64; 4],
    adam: [f64; 4],
    iteration: u64,
    generator_steps: u64,
    discriminator_steps: u64,
    rng_seed: [u8; 32],
    rng_stream: u64,
    /// Decimal, since JSON numbers cannot hold a u128.
    rng_word_pos: String,
    order: Vec<u32>,
    cursor: usize,
}

/// Serializes the complete training state.
pub fn save_checkpoint(state: &TrainState) -> Vec<u8> {
    let c = &state.config;
    let header = Header {
        architecture: c.arch.descriptor(),
        mode: c.mode.to_string(),
        batch_size: c.batch_size,
        total_iterations: c.total_iterations,
        seed: c.seed,
        checkpoint_every: c.checkpoint_every,
        init: [c.init.conv_mean, c.init.conv_std, c.init.bn_weight_mean, c.init.bn_weight_std],
        adam: [c.adam.learning_rate, c.adam.beta1, c.adam.beta2, c.adam.eps],
        iteration: state.iteration,
        generator_steps: state.opt_g.step,
        discriminator_steps: state.opt_d.step,
        rng_seed: state.rng.get_seed(),
        rng_stream: state.rng.get_stream(),
        rng_word_pos: state.rng.get_word_pos().to_string(),
        order: state.order.clone(),
        cursor: state.cursor,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let tensors = named_tensors(state);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

type Named<'a> = (String, &'a [usize], &'a [f32]);

fn named_tensors(state: &TrainState) -> Vec<Named<'_>> {
    let mut all = Vec::new();
    let gan = &state.gan;
    for (net, opt) in [(&gan.generator, &state.opt_g), (&gan.discriminator, &state.opt_d)] {
        for p in net.params().iter().chain(net.buffers()) {
            all.push((p.name.clone(), p.shape.as_slice(), p.value.as_slice()));
        }
        for ((p, m), v) in net.params().iter().zip(&opt.m).zip(&opt.v) {
            all.push((format!("adam.{}.m", p.name), p.shape.as_slice(), m.as_slice()));
            all.push((format!("adam.{}.v", p.name), p.shape.as_slice(), v.as_slice()));
        }
    }
    all
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Restores a training state. With `expected` set, a checkpoint of any other
/// architecture is rejected.
pub fn load_checkpoint(bytes: &[u8], expected: Option<&GanArchitecture>) -> Result<TrainState, CheckpointError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("missing magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch(format!(
            "format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    if bytes.len() < 16 {
        return Err(corrupt("truncated"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().expect("4 bytes")) {
        return Err(corrupt("checksum mismatch"));
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| corrupt(format!("header: {e}")))?;
    let arch = GanArchitecture::from_descriptor(&header.architecture)
        .map_err(|e| CheckpointError::VersionMismatch(e.to_string()))?;
    if let Some(expected) = expected {
        if *expected != arch {
            return Err(CheckpointError::VersionMismatch(format!(
                "architecture `{arch}` does not match expected `{expected}`"
            )));
        }
    }
    let mode: Mode = header.mode.parse().map_err(corrupt)?;
    let [conv_mean, conv_std, bn_weight_mean, bn_weight_std] = header.init;
    let [learning_rate, beta1, beta2, eps] = header.adam;
    let config = GanConfig {
        arch,
        init: InitSpec { conv_mean, conv_std, bn_weight_mean, bn_weight_std },
        adam: AdamConfig { learning_rate, beta1, beta2, eps },
        batch_size: header.batch_size,
        total_iterations: header.total_iterations,
        seed: header.seed,
        mode,
        checkpoint_every: header.checkpoint_every,
    };

    let count = r.u32()? as usize;
    let mut tensors = std::collections::HashMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| corrupt("tensor name is not UTF-8"))?.to_string();
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| corrupt("tensor too large"))?;
        let raw = r.take(len.checked_mul(4).ok_or_else(|| corrupt("tensor too large"))?)?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        tensors.insert(name, (shape, values));
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes after tensors"));
    }

    let mut state = TrainState::new(config);
    let mut fill = |name: &str, shape: &[usize], dst: &mut Vec<f32>| -> Result<(), CheckpointError> {
        let (s, v) = tensors.remove(name).ok_or_else(|| corrupt(format!("missing tensor `{name}`")))?;
        if s != shape {
            return Err(CheckpointError::VersionMismatch(format!("tensor `{name}` has shape {s:?}, expected {shape:?}")));
        }
        *dst = v;
        Ok(())
    };
    let gan = &mut state.gan;
    for (net, opt) in [(&mut gan.generator, &mut state.opt_g), (&mut gan.discriminator, &mut state.opt_d)] {
        for p in net.params_mut() {
            let Param { name, shape, value, .. } = p;
            fill(name, shape, value)?;
        }
        for p in net.buffers_mut() {
            let Param { name, shape, value, .. } = p;
            fill(name, shape, value)?;
        }
        for ((p, m), v) in net.params().iter().zip(&mut opt.m).zip(&mut opt.v) {
            fill(&format!("adam.{}.m", p.name), &p.shape, m)?;
            fill(&format!("adam.{}.v", p.name), &p.shape, v)?;
        }
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(CheckpointError::VersionMismatch(format!("unexpected tensor `{extra}`")));
    }
    state.opt_g.step = header.generator_steps;
    state.opt_d.step = header.discriminator_steps;
    state.iteration = header.iteration;
    let word_pos: u128 = header.rng_word_pos.parse().map_err(|_| corrupt("bad RNG position"))?;
    let mut rng: ChaCha8Rng = rand::SeedableRng::from_seed(header.rng_seed);
    rng.set_stream(header.rng_stream);
    rng.set_word_pos(word_pos);
    state.rng = rng;
    if header.order.iter().any(|&i| i as usize >= header.order.len()) || header.cursor > header.order.len() {
        return Err(corrupt("bad data order"));
    }
    state.order = header.order;
    state.cursor = header.cursor;
    Ok(state)
}
