//! Binary checkpoint format. All integers are little-endian `u32`, all
//! floats little-endian IEEE-754 `f32`:
//!
//! ```text
//! "SEGM"                         magic, 4 bytes
//! version                        u32 (currently 1)
//! in_channels num_classes kernel u32 × 3
//! stage count S, widths          u32, u32 × S
//! leaky_alpha                    f32
//! normalization id               u32 (0 = value / 255)
//! zero_init_head                 u32 (0 or 1)
//! tensor count T                 u32
//! T × { rank R, dims u32 × R, payload f32 × Π dims }
//! ```
//!
//! Tensors appear in [`Network::parameters`] order. Nothing may follow the
//! last payload.

use std::path::Path;

use super::{Network, NetworkConfig, Normalization};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SEGM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let cfg = net.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION as usize);
    put_u32(&mut out, cfg.in_channels);
    put_u32(&mut out, cfg.num_classes);
    put_u32(&mut out, cfg.kernel);
    put_u32(&mut out, cfg.stage_widths.len());
    for &w in &cfg.stage_widths {
        put_u32(&mut out, w);
    }
    out.extend_from_slice(&cfg.leaky_alpha.to_le_bytes());
    put_u32(&mut out, cfg.normalization.id() as usize);
    put_u32(&mut out, cfg.zero_init_head as usize);
    let params = net.parameters();
    put_u32(&mut out, params.len());
    for t in params {
        put_u32(&mut out, t.shape().len());
        for &d in t.shape() {
            put_u32(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} while reading {what}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected \"SEGM\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let in_channels = r.u32("in_channels")?;
    let num_classes = r.u32("num_classes")?;
    let kernel = r.u32("kernel")?;
    let stages = r.u32("stage count")?;
    if stages > 64 {
        return Err(Error::Checkpoint(format!("implausible stage count {stages}")));
    }
    let stage_widths = (0..stages)
        .map(|_| r.u32("stage width"))
        .collect::<Result<Vec<_>>>()?;
    let leaky_alpha = r.f32("leaky_alpha")?;
    let norm_id = r.u32("normalization")? as u32;
    let normalization = Normalization::from_id(norm_id)
        .ok_or_else(|| Error::Checkpoint(format!("unknown normalization id {norm_id}")))?;
    let zero_init_head = match r.u32("zero_init_head")? {
        0 => false,
        1 => true,
        v => return Err(Error::Checkpoint(format!("zero_init_head flag {v} is not 0 or 1"))),
    };
    let config = NetworkConfig {
        in_channels,
        num_classes,
        stage_widths,
        kernel,
        leaky_alpha,
        normalization,
        zero_init_head,
    };
    let mut net = Network::build(config, 0)
        .map_err(|e| Error::Checkpoint(format!("invalid configuration: {e}")))?;

    let count = r.u32("tensor count")?;
    let mut params = net.parameters_mut();
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "architecture has {} tensors, file has {count}",
            params.len()
        )));
    }
    for (i, slot) in params.iter_mut().enumerate() {
        let rank = r.u32("tensor rank")?;
        let dims = (0..rank)
            .map(|_| r.u32("tensor dims"))
            .collect::<Result<Vec<_>>>()?;
        if dims != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {i} has shape {dims:?}, architecture expects {:?}",
                slot.shape()
            )));
        }
        let payload = r.take(4 * slot.len(), "tensor payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        **slot = Tensor::new(dims, data)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
