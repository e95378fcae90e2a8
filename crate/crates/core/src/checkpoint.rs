//! Binary policy checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! b"MARL"  u32 version  u32 n_layers  (u32 rows, u32 cols) * n_layers
//! f32 * n_params                    flat parameter vector
//! u32 dim  f64 mean * dim  f64 var * dim  f64 count
//! u32 len  utf-8 metadata (JSON) * len
//! ```
//!
//! The layer list is the trunk layers, then the action head, then the value
//! head. Each layer contributes its weights (row-major) followed by its
//! bias; `log_std` closes the parameter block.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read, write_atomic};
use crate::nn::{ActorCritic, ActorCriticSpec};
use crate::ppo::RunningNorm;

pub const MAGIC: &[u8; 4] = b"MARL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub total_timesteps: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct PolicyCheckpoint {
    pub net: ActorCritic<f32>,
    pub normalizer: RunningNorm,
    pub meta: CheckpointMeta,
}

pub fn encode(net: &ActorCritic<f32>, norm: &RunningNorm, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let shapes = net.spec().layer_shapes();
    let n_params = net.n_params();
    let mut out = Vec::with_capacity(16 + 8 * shapes.len() + 4 * n_params + 24 * norm.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for (rows, cols) in &shapes {
        out.extend_from_slice(&(*rows as u32).to_le_bytes());
        out.extend_from_slice(&(*cols as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&(norm.dim() as u32).to_le_bytes());
    for x in norm.mean.iter().chain(&norm.var) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&norm.count.to_le_bytes());
    let meta = serde_json::to_vec(meta)?;
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Truncated(what))?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Decodes a checkpoint, requiring its layer shapes to equal `expected`.
pub fn decode(bytes: &[u8], expected: &ActorCriticSpec) -> Result<PolicyCheckpoint> {
    let mut r = Reader { buf: bytes };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let n_layers = r.u32("layer count")? as usize;
    let want = expected.layer_shapes();
    if n_layers != want.len() {
        return Err(Error::ShapeMismatch(format!(
            "{n_layers} layers, expected {}",
            want.len()
        )));
    }
    for (k, &(rows, cols)) in want.iter().enumerate() {
        let got = (r.u32("layer shape")? as usize, r.u32("layer shape")? as usize);
        if got != (rows, cols) {
            return Err(Error::ShapeMismatch(format!(
                "layer {k} is {}x{}, expected {rows}x{cols}",
                got.0, got.1
            )));
        }
    }
    let n_params = expected.param_count();
    let raw = r.take(4 * n_params, "parameters")?;
    let params: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let net = ActorCritic::from_params(expected.clone(), params)?;

    let dim = r.u32("normalizer dim")? as usize;
    if dim != expected.obs_dim {
        return Err(Error::ShapeMismatch(format!(
            "normalizer has {dim} dims, expected {}",
            expected.obs_dim
        )));
    }
    let mean = r.f64s(dim, "normalizer mean")?;
    let var = r.f64s(dim, "normalizer var")?;
    let count = r.f64s(1, "normalizer count")?[0];
    let normalizer = RunningNorm { mean, var, count };

    let len = r.u32("metadata length")? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(len, "metadata")?)?;
    Ok(PolicyCheckpoint { net, normalizer, meta })
}

pub fn save_checkpoint(net: &ActorCritic<f32>, norm: &RunningNorm, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    write_atomic(path, &encode(net, norm, meta)?)
}

/// Loads a checkpoint for the standard landing network.
pub fn load_checkpoint(path: &Path) -> Result<PolicyCheckpoint> {
    load_checkpoint_as(path, &ActorCriticSpec::landing())
}

pub fn load_checkpoint_as(path: &Path, spec: &ActorCriticSpec) -> Result<PolicyCheckpoint> {
    if !path.exists() {
        return Err(Error::CheckpointNotFound(path.to_path_buf()));
    }
    decode(&read(path)?, spec)
}
