//! Checkpoint file: `"ADDN"`, u16 version, u32 header length, JSON header,
//! then per tensor (weight, bias per learnable layer) u8 rank, u32 dims and
//! f32 little-endian values; a CRC32 of all preceding bytes closes the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{append_crc, read_file, split_crc, write_atomic, Reader};
use crate::nn::{LayerParams, NetworkSpec, Parameters};

pub const CKPT_MAGIC: &[u8; 4] = b"ADDN";
pub const CKPT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Parameters<f32>,
    pub n_max: u32,
    pub render_digest: String,
    pub train_config_digest: String,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    n_max: u32,
    render_digest: String,
    train_config_digest: String,
    epoch: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            spec: self.spec.clone(),
            n_max: self.n_max,
            render_digest: self.render_digest.clone(),
            train_config_digest: self.train_config_digest.clone(),
            epoch: self.epoch,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut buf = Vec::with_capacity(json.len() + self.params.count() * 4 + 64);
        buf.extend_from_slice(CKPT_MAGIC);
        buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        for t in self.params.tensors() {
            buf.push(t.shape().len() as u8);
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        append_crc(&mut buf);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let magic = bytes.get(..4).unwrap_or(bytes);
        if magic != CKPT_MAGIC {
            return Err(Error::BadMagic { expected: "ADDN".into(), found: String::from_utf8_lossy(magic).into_owned() });
        }
        let mut r = Reader::new(bytes);
        r.take(4);
        let version = r.u16().ok_or_else(|| Error::Truncated("header".into()))?;
        if version != CKPT_VERSION {
            return Err(Error::VersionMismatch { expected: CKPT_VERSION, found: version });
        }
        let body = split_crc(bytes)?;
        let mut r = Reader::new(body);
        r.take(6);
        let len = r.u32().ok_or_else(|| Error::Truncated("header length".into()))? as usize;
        let json = r.take(len).ok_or_else(|| Error::Truncated("header".into()))?;
        let header: Header = serde_json::from_slice(json)?;

        let mut params = Parameters::<f32>::zeros_like(&header.spec)?;
        for lp in params.layers.iter_mut() {
            let layer = lp.layer;
            for t in [&mut lp.weight, &mut lp.bias] {
                let trunc = || Error::Truncated(format!("tensor of layer {layer}"));
                let rank = r.u8().ok_or_else(trunc)? as usize;
                let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Option<Vec<_>>>().ok_or_else(trunc)?;
                if dims != t.shape() {
                    return Err(Error::ShapeMismatch {
                        layer,
                        detail: format!("stored tensor {dims:?}, spec expects {:?}", t.shape()),
                    });
                }
                let raw = r.take(t.len() * 4).ok_or_else(trunc)?;
                for (v, b) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
                    *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                }
            }
        }
        if r.remaining() != 0 {
            return Err(Error::Malformed(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self {
            spec: header.spec,
            params,
            n_max: header.n_max,
            render_digest: header.render_digest,
            train_config_digest: header.train_config_digest,
            epoch: header.epoch,
        })
    }

    /// Errors with the first layer whose shapes differ from `spec`.
    pub fn ensure_spec(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = Parameters::<f32>::zeros_like(spec)?;
        for (i, want) in expected.layers.iter().enumerate() {
            let have: Option<&LayerParams<f32>> = self.params.layers.get(i);
            let same = have.is_some_and(|h| {
                h.layer == want.layer && h.weight.shape() == want.weight.shape() && h.bias.shape() == want.bias.shape()
            });
            if !same {
                return Err(Error::ShapeMismatch {
                    layer: want.layer,
                    detail: format!(
                        "expected weight {:?}, checkpoint has {:?}",
                        want.weight.shape(),
                        have.map(|h| h.weight.shape().to_vec())
                    ),
                });
            }
        }
        if self.params.layers.len() != expected.layers.len() {
            let layer = self.params.layers.get(expected.layers.len()).map_or(0, |p| p.layer);
            return Err(Error::ShapeMismatch { layer, detail: "checkpoint has extra learnable layers".into() });
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_file(path)?)
}

/// Loads and checks the parameters against an expected architecture.
pub fn load_checkpoint_for(path: &Path, spec: &NetworkSpec) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.ensure_spec(spec)?;
    Ok(ckpt)
}
