//! Versioned binary container for fitted models.
//!
//! Layout, version 1 (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "SBCKPT\0\0"
//! version    u32       1
//! tag        u32 length + UTF-8 bytes      algorithm tag: "cnn", "knn", "plsda"
//! metadata   u64 length + UTF-8 JSON       config, shapes, class names, ...
//! tensors    u32 count, then per tensor:
//!            u32 name length + UTF-8 name
//!            u32 rank, rank × u64 dims
//!            prod(dims) × f64 (little-endian IEEE 754, row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SBCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algorithm: String,
    pub metadata: Map<String, Value>,
    pub tensors: Vec<NamedTensor>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_exact<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0; n];
    r.read_exact(&mut buf)
        .map_err(|e| bad(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r, 4)?.try_into().unwrap()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r, 8)?.try_into().unwrap()))
}

fn read_string<R: Read>(r: &mut R, len: usize) -> Result<String> {
    String::from_utf8(read_exact(r, len)?).map_err(|_| bad("string is not UTF-8"))
}

// Sanity limit so a corrupt length field cannot request absurd allocations.
const MAX_ELEMENTS: u64 = 1 << 34;

impl Checkpoint {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Checkpoint {
            algorithm: algorithm.into(),
            metadata: Map::new(),
            tensors: Vec::new(),
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| bad(format!("missing tensor {name:?}")))
    }

    pub fn meta(&self, key: &str) -> Result<&Value> {
        self.metadata
            .get(key)
            .ok_or_else(|| bad(format!("missing metadata field {key:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.algorithm.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(self.algorithm.as_bytes()).map_err(io)?;
        let meta = serde_json::to_vec(&self.metadata)?;
        w.write_all(&(meta.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&meta).map_err(io)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes()).map_err(io)?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(t.name.as_bytes()).map_err(io)?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes()).map_err(io)?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        if read_exact(&mut r, 8)? != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(bad(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let tag_len = read_u32(&mut r)? as usize;
        let algorithm = read_string(&mut r, tag_len)?;
        let meta_len = read_u64(&mut r)?;
        if meta_len > MAX_ELEMENTS {
            return Err(bad("metadata length out of range"));
        }
        let meta = read_exact(&mut r, meta_len as usize)?;
        let metadata: Map<String, Value> = serde_json::from_slice(&meta)?;
        let count = read_u32(&mut r)?;
        let mut tensors = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let name = read_string(&mut r, name_len)?;
            let rank = read_u32(&mut r)?;
            let mut shape = Vec::with_capacity(rank.min(8) as usize);
            let mut total: u64 = 1;
            for _ in 0..rank {
                let d = read_u64(&mut r)?;
                total = total.saturating_mul(d);
                shape.push(d as usize);
            }
            if total > MAX_ELEMENTS {
                return Err(bad(format!("tensor {name:?} is too large")));
            }
            let bytes = read_exact(&mut r, total as usize * 8)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Checkpoint {
            algorithm,
            metadata,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(BufReader::new(f))
    }
}
