//! Single-file model checkpoint: a magic/version header line followed by a JSON
//! body with the config, the vocabulary hash and every tensor with its shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &str = "SENTIFLOW-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Body {
    config: ModelConfig,
    vocab_hash: String,
    tensors: Vec<TensorRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub params: ModelParams<T>,
}

pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    params: &ModelParams<T>,
    config: &ModelConfig,
    vocab_hash: &str,
) -> Result<()> {
    let path = path.as_ref();
    let body = Body {
        config: config.clone(),
        vocab_hash: vocab_hash.to_string(),
        tensors: params
            .named_tensors()
            .into_iter()
            .map(|(name, m)| TensorRecord {
                name,
                shape: [m.rows(), m.cols()],
                data: m.as_slice().iter().map(|x| x.as_f64()).collect(),
            })
            .collect(),
    };
    let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
    out.push_str(&serde_json::to_string(&body)?);
    out.push('\n');
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint, validating the header and every tensor shape against the
/// stored config. When `expected_vocab_hash` is given it must match.
pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>, expected_vocab_hash: Option<&str>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (header, body) = raw
        .split_once('\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let version = header
        .strip_prefix(CHECKPOINT_MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::Checkpoint("not a checkpoint file".into()))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version `{version}`")));
    }
    let body: Body = serde_json::from_str(body)?;
    body.config.validate()?;
    if let Some(h) = expected_vocab_hash {
        if h != body.vocab_hash {
            return Err(Error::Checkpoint(
                "vocabulary hash does not match the checkpoint".into(),
            ));
        }
    }

    let mut params = ModelParams::<T>::zeros(&body.config);
    let expected: Vec<(String, (usize, usize))> = params
        .named_tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    if expected.len() != body.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            body.tensors.len()
        )));
    }
    for ((slot, (name, shape)), rec) in params.tensors_mut().into_iter().zip(expected).zip(body.tensors) {
        if rec.name != name {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{name}`, found `{}`",
                rec.name
            )));
        }
        if (rec.shape[0], rec.shape[1]) != shape || rec.data.len() != shape.0 * shape.1 {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, config requires {shape:?}",
                rec.shape
            )));
        }
        *slot = Matrix::from_vec(shape.0, shape.1, rec.data.into_iter().map(T::lit).collect());
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("checkpoint contains non-finite values".into()));
    }
    Ok(Checkpoint {
        config: body.config,
        vocab_hash: body.vocab_hash,
        params,
    })
}
