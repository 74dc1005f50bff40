//! The `TNSR` binary container.
//!
//! Layout: `TNSR` magic, version byte (1), dtype byte, two reserved zero
//! bytes, `u32` LE rank, rank × `u64` LE extents, then the row-major payload
//! in little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F64 = 1,
    F32 = 2,
}

impl DType {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F64),
            2 => Some(DType::F32),
            _ => None,
        }
    }
}

impl Tensor {
    pub fn to_tnsr_bytes(&self, dtype: DType) -> Vec<u8> {
        let width = match dtype {
            DType::F64 => 8,
            DType::F32 => 4,
        };
        let mut out = Vec::with_capacity(12 + 8 * self.shape.len() + width * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(dtype as u8);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &extent in &self.shape {
            out.extend_from_slice(&(extent as u64).to_le_bytes());
        }
        match dtype {
            DType::F64 => self
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            DType::F32 => self
                .data
                .iter()
                .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        }
        out
    }

    pub fn write_tnsr<W: Write>(&self, mut writer: W, dtype: DType) -> Result<()> {
        writer.write_all(&self.to_tnsr_bytes(dtype))?;
        Ok(())
    }

    /// Decodes a TNSR buffer. `F32` payloads are widened to `f64`.
    pub fn from_tnsr_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 12 {
            return Err("truncated header".into());
        }
        if &bytes[0..4] != MAGIC {
            return Err("bad magic".into());
        }
        if bytes[4] != VERSION {
            return Err(format!("unsupported version {}", bytes[4]));
        }
        let dtype = DType::from_code(bytes[5]).ok_or_else(|| format!("unknown dtype {}", bytes[5]))?;
        if bytes[6] != 0 || bytes[7] != 0 {
            return Err("reserved bytes are not zero".into());
        }
        let ndim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = 12 + 8 * ndim;
        if bytes.len() < header {
            return Err("truncated extents".into());
        }
        let shape: Vec<usize> = bytes[12..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count: usize = shape.iter().product();
        let payload = &bytes[header..];
        let data: Vec<f64> = match dtype {
            DType::F64 => {
                if payload.len() != count * 8 {
                    return Err(format!("payload is {} bytes, expected {}", payload.len(), count * 8));
                }
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
            DType::F32 => {
                if payload.len() != count * 4 {
                    return Err(format!("payload is {} bytes, expected {}", payload.len(), count * 4));
                }
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect()
            }
        };
        Ok(Tensor { shape, data })
    }

    pub fn read_tnsr<R: Read>(mut reader: R) -> Result<Self> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        Self::from_tnsr_bytes(&buf).map_err(|reason| Error::Format {
            path: "<reader>".into(),
            reason,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tnsr_bytes(DType::F64))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_tnsr_bytes(&bytes).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }
}
