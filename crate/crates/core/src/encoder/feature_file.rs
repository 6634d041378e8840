//! `VFMF` binary tensors: magic, version, rank, dims, f32 little-endian payload.
//!
//! ```text
//! offset  size        field
//! 0       4           b"VFMF"
//! 4       4           version, u32 LE (= 1)
//! 8       4           rank, u32 LE
//! 12      4·rank      dims, u32 LE each
//! ..      4·Πdims     payload, f32 LE, row-major
//! ```

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"VFMF";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureFileError {
    #[error("bad magic {0:?}, expected \"VFMF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated: needs at least {needed} bytes, has {got}")]
    Truncated { needed: usize, got: usize },
    #[error("payload is {got} bytes but dims {dims:?} require {expected}")]
    LengthMismatch {
        dims: Vec<u32>,
        expected: usize,
        got: usize,
    },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("dims {dims:?} do not describe {len} values")]
    ShapeMismatch { dims: Vec<u32>, len: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl FeatureFile {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self, FeatureFileError> {
        if dims.is_empty() {
            return Err(FeatureFileError::ZeroRank);
        }
        if dims.iter().map(|&d| d as usize).product::<usize>() != data.len() {
            return Err(FeatureFileError::ShapeMismatch {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureFileError> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(FeatureFileError::Truncated {
                    needed: n,
                    got: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        need(12)?;
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(FeatureFileError::BadMagic(magic));
        }
        let version = u32_at(4);
        if version != VERSION {
            return Err(FeatureFileError::UnsupportedVersion(version));
        }
        let rank = u32_at(8) as usize;
        if rank == 0 {
            return Err(FeatureFileError::ZeroRank);
        }
        let header = 12usize
            .checked_add(rank.checked_mul(4).ok_or(FeatureFileError::ZeroRank)?)
            .ok_or(FeatureFileError::ZeroRank)?;
        need(header)?;
        let dims: Vec<u32> = (0..rank).map(|i| u32_at(12 + 4 * i)).collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|n| n.checked_mul(4));
        let payload = bytes.len() - header;
        match count {
            Some(expected) if expected == payload => {}
            Some(expected) => {
                return Err(FeatureFileError::LengthMismatch {
                    dims,
                    expected,
                    got: payload,
                });
            }
            None => {
                return Err(FeatureFileError::LengthMismatch {
                    dims,
                    expected: usize::MAX,
                    got: payload,
                })
            }
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FeatureFileError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Writes via a temporary file and rename, so readers never see a partial file.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FeatureFileError> {
        let path = path.as_ref();
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
        tmp.write_all(&self.to_bytes())
            .map_err(|e| io_err(path, e))?;
        tmp.persist(path).map_err(|e| io_err(path, e.error))?;
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> FeatureFileError {
    FeatureFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
