//! Binary tensor files.
//!
//! Layout: magic `NWT1`, `u32` rank, `rank` x `u32` dims, then the row-major
//! payload as float32. All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::ast::{Body, Op};
use super::FrontendError;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"NWT1";

/// Fixed parameters keyed by `variable` label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(label.into(), tensor);
    }

    pub fn get(&self, label: &str) -> Option<&Tensor> {
        self.tensors.get(label)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Writes one file per label under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), FrontendError> {
        for (label, tensor) in &self.tensors {
            let path = weight_path(dir, label);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| FrontendError::io(parent, e))?;
            }
            write_tensor_file(&path, tensor)?;
        }
        Ok(())
    }
}

/// `<dir>/<label>.dat`
pub fn weight_path(dir: &Path, label: &str) -> PathBuf {
    dir.join(format!("{label}.dat"))
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Header dims plus whatever payload is present; the payload length is not
/// checked against the header here.
fn decode_parts(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>), String> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err("missing NWT1 magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let rank = word(4) as usize;
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(format!("truncated header for rank {rank}"));
    }
    let dims = (0..rank).map(|k| word(8 + 4 * k) as usize).collect();
    let payload = &bytes[header..];
    if !payload.len().is_multiple_of(4) {
        return Err(format!(
            "payload of {} bytes is not whole floats",
            payload.len()
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, data))
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, FrontendError> {
    let (dims, data) = decode_parts(bytes).map_err(FrontendError::BadTensorFile)?;
    Tensor::new(dims, data).map_err(|e| FrontendError::BadTensorFile(e.to_string()))
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor, FrontendError> {
    let bytes = fs::read(path).map_err(|e| FrontendError::io(path, e))?;
    decode_tensor(&bytes)
}

pub fn write_tensor_file(path: &Path, t: &Tensor) -> Result<(), FrontendError> {
    fs::write(path, encode_tensor(t)).map_err(|e| FrontendError::io(path, e))
}

/// Loads one file per `variable` label of `program` and checks it against
/// the declared shape.
pub fn load_weights<B: Body + ?Sized>(
    dir: &Path,
    program: &B,
) -> Result<WeightStore, FrontendError> {
    let mut store = WeightStore::new();
    for inst in program
        .instructions()
        .iter()
        .filter(|i| i.op == Op::Variable)
    {
        let label = inst.label().unwrap_or(&inst.result);
        if store.get(label).is_some() {
            continue;
        }
        let declared: Vec<i64> = inst.declared_shape().unwrap_or(&[]).to_vec();
        let path = weight_path(dir, label);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(FrontendError::MissingWeight {
                    label: label.to_string(),
                    path,
                })
            }
            Err(e) => return Err(FrontendError::io(&path, e)),
        };
        let (dims, data) = decode_parts(&bytes).map_err(FrontendError::BadTensorFile)?;
        let dims_match = dims.len() == declared.len()
            && dims.iter().zip(&declared).all(|(&d, &s)| d as i64 == s);
        let expected: usize = declared.iter().map(|&d| d.max(0) as usize).product();
        if !dims_match || data.len() != expected {
            return Err(FrontendError::ShapeMismatch {
                label: label.to_string(),
                declared,
                found: dims,
                elements: data.len(),
            });
        }
        let tensor =
            Tensor::new(dims, data).map_err(|e| FrontendError::BadTensorFile(e.to_string()))?;
        store.insert(label, tensor);
    }
    Ok(store)
}
