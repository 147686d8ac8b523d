//! `CPKW1` weight files.
//!
//! Layout: the magic `CPKW1\n`, a little-endian u32 tensor count, then per
//! tensor (sorted by name): u16 name length + UTF-8 name, u8 rank, u32
//! dims, raw little-endian IEEE-754 f32 values. Round trips are bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{ModelGraph, NnError, Tensor};

pub const WEIGHT_MAGIC: &[u8; 6] = b"CPKW1\n";

/// Serialize the graph's weights (sorted by tensor name).
pub fn save_weights(graph: &ModelGraph<f32>, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(WEIGHT_MAGIC);
    let count = u32::try_from(graph.weights().len()).map_err(|_| NnError::WeightFile {
        path: path.to_path_buf(),
        detail: "too many tensors".into(),
    })?;
    bytes.extend_from_slice(&count.to_le_bytes());
    for (name, tensor) in graph.weights() {
        let name_bytes = name.as_bytes();
        let name_len = u16::try_from(name_bytes.len()).map_err(|_| NnError::WeightFile {
            path: path.to_path_buf(),
            detail: format!("tensor name too long: {name}"),
        })?;
        bytes.extend_from_slice(&name_len.to_le_bytes());
        bytes.extend_from_slice(name_bytes);
        bytes.push(u8::try_from(tensor.shape().len()).expect("rank fits u8"));
        for &dim in tensor.shape() {
            bytes.extend_from_slice(&u32::try_from(dim).expect("dim fits u32").to_le_bytes());
        }
        for &v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a weight file into a name -> tensor map.
pub fn read_weight_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, Tensor<f32>>, NnError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file_err = |detail: String| NnError::WeightFile {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < WEIGHT_MAGIC.len() || &bytes[..WEIGHT_MAGIC.len()] != WEIGHT_MAGIC {
        return Err(file_err("bad magic, expected CPKW1".into()));
    }
    let mut pos = WEIGHT_MAGIC.len();
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], NnError> {
        if *pos + n > bytes.len() {
            return Err(NnError::WeightFile {
                path: path.to_path_buf(),
                detail: format!("truncated at byte {pos}", pos = *pos),
            });
        }
        let slice = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(slice)
    };
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    let mut map = BTreeMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, name_len)?)
            .map_err(|_| file_err("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = take(&mut pos, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = take(&mut pos, numel * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| file_err(format!("tensor '{name}': {e}")))?;
        if map.insert(name.clone(), tensor).is_some() {
            return Err(file_err(format!("duplicate tensor '{name}'")));
        }
    }
    if pos != bytes.len() {
        return Err(file_err(format!("{} trailing bytes after last tensor", bytes.len() - pos)));
    }
    Ok(map)
}

/// Load weights into a graph of matching topology.
///
/// Every tensor name and shape must line up; the first mismatch is
/// reported by name.
pub fn load_weights(graph: &mut ModelGraph<f32>, path: impl AsRef<Path>) -> Result<(), NnError> {
    let loaded = read_weight_file(path)?;
    for (name, tensor) in graph.weights() {
        match loaded.get(name) {
            None => {
                return Err(NnError::WeightMismatch {
                    name: name.clone(),
                    detail: "missing from weight file".into(),
                })
            }
            Some(t) if t.shape() != tensor.shape() => {
                return Err(NnError::WeightMismatch {
                    name: name.clone(),
                    detail: format!("file shape {:?}, graph expects {:?}", t.shape(), tensor.shape()),
                })
            }
            Some(_) => {}
        }
    }
    for name in loaded.keys() {
        if !graph.weights().contains_key(name) {
            return Err(NnError::WeightMismatch {
                name: name.clone(),
                detail: "not a weight of this graph".into(),
            });
        }
    }
    graph.set_weights(loaded)
}
