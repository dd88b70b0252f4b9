//! The closed image set Ω and its packed on-disk form.
//!
//! Packed layout (little-endian): `"ADDI"`, u16 version, u16 N, u16 width,
//! u16 height, u8 ink, u8 background, u32 count, then `count` records of
//! u16 n, u16 m, u16 label and width·height pixel bytes, ordered by (n, m).
//! A CRC32 of everything before it closes the file.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyph::{render_formula, resolve_scale, Image, RenderConfig};
use crate::io_util::{append_crc, read_file, sha256_hex, split_crc, write_atomic, Reader};

pub const PACK_MAGIC: &[u8; 4] = b"ADDI";
pub const PACK_VERSION: u16 = 1;
const PACK_HEADER_LEN: usize = 4 + 2 * 4 + 2 + 4;

/// One formula `n+m`. `(n, m)` and `(m, n)` are distinct keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct AdditionKey {
    pub n: u32,
    pub m: u32,
}

impl AdditionKey {
    pub const fn new(n: u32, m: u32) -> Self {
        Self { n, m }
    }

    pub fn dual(self) -> Self {
        Self { n: self.m, m: self.n }
    }

    pub fn is_diagonal(self) -> bool {
        self.n == self.m
    }

    pub fn label(self) -> u32 {
        label_of(self)
    }

    /// Row-major index of the key inside Ω for maximum integer `n_max`.
    pub fn index(self, n_max: u32) -> usize {
        (self.n as usize) * (n_max as usize + 1) + self.m as usize
    }

    pub fn in_range(self, n_max: u32) -> bool {
        self.n <= n_max && self.m <= n_max
    }
}

impl From<[u32; 2]> for AdditionKey {
    fn from([n, m]: [u32; 2]) -> Self {
        Self { n, m }
    }
}

impl From<AdditionKey> for [u32; 2] {
    fn from(k: AdditionKey) -> Self {
        [k.n, k.m]
    }
}

impl fmt::Display for AdditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.n, self.m)
    }
}

/// Every key of Ω in canonical (lexicographic) order.
pub fn all_keys(n_max: u32) -> impl Iterator<Item = AdditionKey> {
    (0..=n_max).flat_map(move |n| (0..=n_max).map(move |m| AdditionKey::new(n, m)))
}

pub fn label_of(key: AdditionKey) -> u32 {
    key.n + key.m
}

/// Number of classes for maximum integer `n_max`: labels 0..=2N.
pub fn class_count(n_max: u32) -> usize {
    2 * n_max as usize + 1
}

/// Number of ordered pairs in Ω summing to `k`.
pub fn class_size(k: u32, n_max: u32) -> Result<u32> {
    if k > 2 * n_max {
        return Err(Error::LabelOutOfRange { label: k, max: 2 * n_max });
    }
    Ok(k.min(2 * n_max - k) + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub key: AdditionKey,
    pub label: u32,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub n_max: u32,
    pub render_cfg: RenderConfig,
    pub examples: Vec<Example>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        class_count(self.n_max)
    }

    pub fn get(&self, key: AdditionKey) -> Option<&Example> {
        if !key.in_range(self.n_max) {
            return None;
        }
        self.examples.get(key.index(self.n_max))
    }

    pub fn keys(&self) -> impl Iterator<Item = AdditionKey> + '_ {
        self.examples.iter().map(|e| e.key)
    }

    /// SHA-256 of the packed representation; identifies the rendered content.
    pub fn digest(&self) -> String {
        sha256_hex(&self.pack_body())
    }

    fn pack_body(&self) -> Vec<u8> {
        let cfg = &self.render_cfg;
        let px = (cfg.width * cfg.height) as usize;
        let mut buf = Vec::with_capacity(PACK_HEADER_LEN + self.len() * (6 + px) + 4);
        buf.extend_from_slice(PACK_MAGIC);
        buf.extend_from_slice(&PACK_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n_max as u16).to_le_bytes());
        buf.extend_from_slice(&(cfg.width as u16).to_le_bytes());
        buf.extend_from_slice(&(cfg.height as u16).to_le_bytes());
        buf.push(cfg.ink);
        buf.push(cfg.background);
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for ex in &self.examples {
            buf.extend_from_slice(&(ex.key.n as u16).to_le_bytes());
            buf.extend_from_slice(&(ex.key.m as u16).to_le_bytes());
            buf.extend_from_slice(&(ex.label as u16).to_le_bytes());
            buf.extend_from_slice(&ex.image.pixels);
        }
        buf
    }

    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut buf = self.pack_body();
        append_crc(&mut buf);
        buf
    }

    pub fn from_packed_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.take(4).unwrap_or(bytes);
        if magic != PACK_MAGIC {
            return Err(Error::BadMagic {
                expected: "ADDI".into(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let header = || Error::Truncated("header".into());
        let version = r.u16().ok_or_else(header)?;
        if version != PACK_VERSION {
            return Err(Error::VersionMismatch { expected: PACK_VERSION, found: version });
        }
        let n_max = r.u16().ok_or_else(header)? as u32;
        let width = r.u16().ok_or_else(header)? as u32;
        let height = r.u16().ok_or_else(header)? as u32;
        let ink = r.u8().ok_or_else(header)?;
        let background = r.u8().ok_or_else(header)?;
        let count = r.u32().ok_or_else(header)? as usize;

        let px = (width * height) as usize;
        let mut examples = Vec::with_capacity(count.min(1 << 20));
        for i in 0..count {
            let rec = r.take(6 + px).ok_or(Error::TruncatedRecord { record: i })?;
            let n = u16::from_le_bytes([rec[0], rec[1]]) as u32;
            let m = u16::from_le_bytes([rec[2], rec[3]]) as u32;
            let label = u16::from_le_bytes([rec[4], rec[5]]) as u32;
            examples.push(Example {
                key: AdditionKey::new(n, m),
                label,
                image: Image { width, height, pixels: rec[6..].to_vec() },
            });
        }
        match r.remaining() {
            4 => {}
            0..=3 => return Err(Error::Truncated("missing checksum".into())),
            extra => return Err(Error::Malformed(format!("{} trailing bytes", extra - 4))),
        }
        split_crc(bytes)?;

        let side = n_max as usize + 1;
        if count != side * side {
            return Err(Error::Malformed(format!("count {count} != (N+1)^2 = {}", side * side)));
        }
        for (ex, key) in examples.iter().zip(all_keys(n_max)) {
            if ex.key != key {
                return Err(Error::Malformed(format!("record {} out of canonical order (expected {key})", ex.key)));
            }
            if ex.label != label_of(key) {
                return Err(Error::Malformed(format!("record {key} has label {}", ex.label)));
            }
        }
        let render_cfg = RenderConfig { ink, background, ..RenderConfig::for_canvas(width, height) };
        Ok(Self { n_max, render_cfg, examples })
    }
}

/// Renders all (N+1)² formulas. Rendering runs in parallel; record order is canonical.
pub fn build_image_set(n_max: u32, cfg: &RenderConfig) -> Result<ImageSet> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if n_max > u16::MAX as u32 / 2 || cfg.width > u16::MAX as u32 || cfg.height > u16::MAX as u32 {
        return Err(Error::InvalidArgument("n_max or canvas exceeds the packed format range".into()));
    }
    resolve_scale(n_max, cfg)?;
    let keys: Vec<AdditionKey> = all_keys(n_max).collect();
    let examples = keys
        .par_iter()
        .map(|&key| {
            render_formula(key, n_max, cfg).map(|image| Example { key, label: label_of(key), image })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageSet { n_max, render_cfg: cfg.clone(), examples })
}

pub fn write_packed(set: &ImageSet, path: &Path) -> Result<()> {
    write_atomic(path, &set.to_packed_bytes())
}

pub fn read_packed(path: &Path) -> Result<ImageSet> {
    ImageSet::from_packed_bytes(&read_file(path)?)
}
