//! Versioned binary container of named, shape-tagged `f64` blocks.
//!
//! Layout (little endian): magic `UAVLARC1`, `u32` version, `u32`-prefixed
//! kind string, `u32` block count, then per block a `u32`-prefixed name,
//! `u32` rank, `u64` dims and the raw values.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learning::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"UAVLARC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Archive {
    pub kind: String,
    pub blocks: Vec<(String, Tensor)>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Config(format!("archive: {}", msg.into()))
}

impl Archive {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), blocks: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, t: &Tensor) {
        self.blocks.push((name.into(), Tensor { shape: t.shape.clone(), data: t.data.clone(), grad: Vec::new() }));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| corrupt(format!("missing block {name}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(&mut w, &self.kind)?;
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        for (name, t) in &self.blocks {
            write_str(&mut w, name)?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for d in &t.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let kind = read_str(&mut r)?;
        let n = read_u32(&mut r)?;
        let mut blocks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let name = read_str(&mut r)?;
            let rank = read_u32(&mut r)? as usize;
            let shape = (0..rank).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(|| corrupt("block too large"))?;
            let mut raw = Vec::new();
            (&mut r).take(len as u64 * 8).read_to_end(&mut raw)?;
            if raw.len() != len * 8 {
                return Err(corrupt(format!("block {name} truncated")));
            }
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            blocks.push((name, Tensor { shape, data, grad: Vec::new() }));
        }
        Ok(Self { kind, blocks })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut raw = Vec::new();
    r.take(len as u64).read_to_end(&mut raw)?;
    if raw.len() != len {
        return Err(corrupt("string truncated"));
    }
    String::from_utf8(raw).map_err(|_| corrupt("string is not utf-8"))
}

/// Path of the text sidecar next to a binary file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// `key = value` lines, sorted by key.
pub fn write_metadata(path: &Path, meta: &BTreeMap<String, String>) -> Result<()> {
    let text: String = meta.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut meta = BTreeMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| corrupt(format!("bad metadata line {line:?}")))?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(meta)
}

pub fn meta_get<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .ok_or_else(|| corrupt(format!("metadata key {key} missing")))?
        .parse()
        .map_err(|_| corrupt(format!("metadata key {key} unparsable")))
}
