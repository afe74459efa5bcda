//! On-disk formats: the `DPNO` tensor container, named-tensor checkpoints
//! and `key=value` metadata files.
//!
//! Tensor record: `"DPNO"`, u32 version (1), u32 dtype (0 = f32, 1 = f64),
//! u32 ndim, ndim × u64 dims, row-major little-endian payload. A checkpoint
//! is a sequence of (u32 name length, UTF-8 name, tensor record).

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPNO";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

pub fn encode_tensor(t: &Tensor, dtype: DType, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dtype as u32).to_le_bytes());
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match dtype {
        DType::F64 => t
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        DType::F32 => t
            .data()
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated {what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn tensor(&mut self) -> Result<(Tensor, DType)> {
        if self.take(4, "magic")? != MAGIC {
            return Err(Error::Format("bad magic (expected \"DPNO\")".into()));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = match self.u32("dtype")? {
            0 => DType::F32,
            1 => DType::F64,
            d => return Err(Error::Format(format!("unknown dtype code {d}"))),
        };
        let ndim = self.u32("ndim")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let d = self.u64("dims")?;
            shape.push(
                usize::try_from(d)
                    .map_err(|_| Error::Format(format!("dimension {d} too large")))?,
            );
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size()).map(|_| n))
            .ok_or_else(|| Error::Format(format!("shape {shape:?} overflows")))?;
        let payload = self.take(numel * dtype.size(), "payload")?;
        let data = match dtype {
            DType::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            DType::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        };
        let t = Tensor::new(&shape, data).map_err(|e| Error::Format(e.to_string()))?;
        Ok((t, dtype))
    }
}

/// Decode one tensor record that must span the whole buffer.
pub fn decode_tensor(bytes: &[u8]) -> Result<(Tensor, DType)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let out = r.tensor()?;
    if !r.done() {
        return Err(Error::Format(format!(
            "{} trailing bytes after tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

/// Fail with [`Error::Exists`] unless `force` or the path is free.
pub fn check_overwrite(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::Exists {
            path: path.display().to_string(),
        });
    }
    Ok(())
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_tensor_as(path, t, DType::F64)
}

pub fn write_tensor_as(path: &Path, t: &Tensor, dtype: DType) -> Result<()> {
    let mut buf = Vec::new();
    encode_tensor(t, dtype, &mut buf);
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    decode_tensor(&bytes)
        .map(|(t, _)| t)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn encode_checkpoint(named: &[(String, Tensor)]) -> Vec<u8> {
    let mut buf = Vec::new();
    for (name, t) in named {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        encode_tensor(t, DType::F64, &mut buf);
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let mut out = Vec::new();
    while !r.done() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let (t, _) = r
            .tensor()
            .map_err(|e| Error::Format(format!("`{name}`: {e}")))?;
        out.push((name, t));
    }
    Ok(out)
}

pub fn write_checkpoint(path: &Path, named: &[(String, Tensor)]) -> Result<()> {
    fs::write(path, encode_checkpoint(named))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("metadata lacks `{key}`")))
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("metadata `{key}`: cannot parse `{v}`")))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key=value", i + 1)))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self(out))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
