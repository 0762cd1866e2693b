//! Flat binary parameter checkpoints.
//!
//! Layout: magic, format version, model kind string, a manifest of
//! `(name, shape)` entries, then all values as little-endian `f64` in
//! manifest order.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;

const MAGIC: &[u8; 8] = b"BTRKCKPT";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint file is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
}

/// A parsed checkpoint: model kind plus named tensors in file order.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_kind: String,
    pub entries: Vec<(String, Tensor)>,
}

pub fn save_checkpoint(
    path: &Path,
    model_kind: &str,
    entries: &[(String, &Tensor)],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_string(&mut w, model_kind)?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        write_string(&mut w, name)?;
        let shape = tensor.shape();
        w.write_all(&(shape.len() as u8).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
    }
    for (_, tensor) in entries {
        for v in tensor.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let model_kind = read_string(&mut r)?;
    let count = read_u32(&mut r)? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let name = read_string(&mut r)?;
        let mut ndim = [0u8; 1];
        read_exact(&mut r, &mut ndim)?;
        let shape: Vec<usize> = (0..ndim[0])
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        manifest.push((name, shape));
    }
    let mut entries = Vec::with_capacity(count);
    for (name, shape) in manifest {
        let len: usize = shape.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            read_exact(&mut r, &mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        let tensor = Tensor::from_values(&shape, values)
            .map_err(|e| CheckpointError::Corrupt(format!("tensor '{name}': {e}")))?;
        entries.push((name, tensor));
    }
    Ok(Checkpoint {
        model_kind,
        entries,
    })
}

impl Checkpoint {
    /// Verify the checkpoint matches an expected model kind and manifest,
    /// returning the tensors in manifest order.
    pub fn into_tensors(
        self,
        expected_kind: &str,
        expected_manifest: &[(String, Vec<usize>)],
    ) -> Result<Vec<Tensor>, CheckpointError> {
        if self.model_kind != expected_kind {
            return Err(CheckpointError::ManifestMismatch(format!(
                "model kind '{}' does not match expected '{expected_kind}'",
                self.model_kind
            )));
        }
        if self.entries.len() != expected_manifest.len() {
            return Err(CheckpointError::ManifestMismatch(format!(
                "{} parameters in file, expected {}",
                self.entries.len(),
                expected_manifest.len()
            )));
        }
        let mut tensors = Vec::with_capacity(self.entries.len());
        for ((name, tensor), (want_name, want_shape)) in
            self.entries.into_iter().zip(expected_manifest)
        {
            if &name != want_name || tensor.shape() != want_shape.as_slice() {
                return Err(CheckpointError::ManifestMismatch(format!(
                    "entry '{}' {:?}, expected '{}' {:?}",
                    name,
                    tensor.shape(),
                    want_name,
                    want_shape
                )));
            }
            tensors.push(tensor);
        }
        Ok(tensors)
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u16).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_string<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let mut len = [0u8; 2];
    read_exact(r, &mut len)?;
    let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| CheckpointError::Corrupt("invalid utf-8 string".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CheckpointError::Corrupt("unexpected end of file".into())
        } else {
            CheckpointError::Io(e)
        }
    })
}
