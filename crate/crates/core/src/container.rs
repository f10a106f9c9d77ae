//! Named-tensor file container.
//!
//! Single-file format used for model checkpoints, CRF parameters and cached
//! spectrograms:
//!
//! ```text
//! magic "NTCR" | u32 LE container version | u64 LE manifest length |
//! manifest (JSON) | payload (raw little-endian scalars, concatenated)
//! ```
//!
//! The manifest lists every tensor's name, shape, byte offset into the
//! payload and byte length, plus the element dtype and a free-form string
//! metadata map.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::Result;

const MAGIC: &[u8; 4] = b"NTCR";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dtype: String,
    entries: Vec<Entry>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
    /// Byte length of the raw data.
    len: u64,
}

/// Serialises named tensors plus a metadata map.
pub fn save_tensors<T: Scalar>(
    path: &Path,
    tensors: &[(String, &Tensor<T>)],
    meta: &BTreeMap<String, String>,
) -> Result<()> {
    let elem = std::mem::size_of::<T>() as u64;
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, tensor) in tensors {
        let len = tensor.numel() as u64 * elem;
        entries.push(Entry {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            offset,
            len,
        });
        offset += len;
    }
    let manifest = Manifest {
        dtype: T::DTYPE.to_string(),
        entries,
        meta: meta.clone(),
    };
    let manifest_json =
        serde_json::to_vec(&manifest).map_err(|e| Error::container(path.display().to_string(), e.to_string()))?;

    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(manifest_json.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&manifest_json).map_err(io_err)?;
    let mut buf = Vec::new();
    for (_, tensor) in tensors {
        buf.clear();
        if T::DTYPE == "f32" {
            for &v in tensor.data() {
                buf.extend_from_slice(&v.to_f32().unwrap().to_le_bytes());
            }
        } else {
            for &v in tensor.data() {
                buf.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Loads all tensors and the metadata map, in stored order.
pub fn load_tensors<T: Scalar>(path: &Path) -> Result<(Vec<(String, Tensor<T>)>, BTreeMap<String, String>)> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(display.clone(), e))?;
    if &magic != MAGIC {
        return Err(Error::container(display, "bad magic; not a tensor container"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|e| Error::io(display.clone(), e))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::container(display, format!("unsupported container version {version}")));
    }
    let mut long = [0u8; 8];
    r.read_exact(&mut long).map_err(|e| Error::io(display.clone(), e))?;
    let manifest_len = u64::from_le_bytes(long) as usize;
    let mut manifest_buf = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_buf).map_err(|e| Error::io(display.clone(), e))?;
    let manifest: Manifest =
        serde_json::from_slice(&manifest_buf).map_err(|e| Error::container(display.clone(), e.to_string()))?;
    if manifest.dtype != T::DTYPE {
        return Err(Error::container(
            display,
            format!("dtype mismatch: container holds {}, requested {}", manifest.dtype, T::DTYPE),
        ));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| Error::io(display.clone(), e))?;

    let elem = std::mem::size_of::<T>();
    let mut tensors = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let (start, len) = (entry.offset as usize, entry.len as usize);
        let end = start + len;
        if end > payload.len() || len != entry.shape.iter().product::<usize>() * elem {
            return Err(Error::container(
                display,
                format!("entry {} has inconsistent offsets", entry.name),
            ));
        }
        let mut data = Vec::with_capacity(len / elem);
        for chunk in payload[start..end].chunks_exact(elem) {
            let v = if T::DTYPE == "f32" {
                T::from(f32::from_le_bytes(chunk.try_into().unwrap())).unwrap()
            } else {
                T::from(f64::from_le_bytes(chunk.try_into().unwrap())).unwrap()
            };
            data.push(v);
        }
        tensors.push((entry.name.clone(), Tensor::from_vec(&entry.shape, data)));
    }
    Ok((tensors, manifest.meta))
}

/// Convenience: loads tensors into a name-indexed map.
pub fn load_tensor_map<T: Scalar>(path: &Path) -> Result<(BTreeMap<String, Tensor<T>>, BTreeMap<String, String>)> {
    let (tensors, meta) = load_tensors(path)?;
    Ok((tensors.into_iter().collect(), meta))
}
