//! Checkpoint file format.
//!
//! Layout: the magic bytes `HCVAE1\n`, a little-endian `u64` header
//! length, a JSON header (parameter names and shapes, dtype, config echo,
//! RNG seed, vocabulary, label hierarchy, optional optimizer metadata),
//! then the raw little-endian tensor data in header order. When optimizer
//! state is present, the first-moment tensors follow the parameters in
//! the same order, then the second-moment tensors. Round-trips are
//! bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tensor};
use crate::data::LabelHierarchy;
use crate::error::CoreError;

use super::adam::{AdamHyper, AdamState};
use super::params::ModelParams;

pub const MAGIC: &[u8] = b"HCVAE1\n";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamMeta {
    step: u64,
    hyper: AdamHyper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    dtype: String,
    variant: String,
    seed: u64,
    config: serde_json::Value,
    vocab: Vec<String>,
    hierarchy: LabelHierarchy,
    tensors: Vec<TensorEntry>,
    adam: Option<AdamMeta>,
}

/// Run provenance stored alongside the tensors.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub variant: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub vocab: Vec<String>,
    pub hierarchy: LabelHierarchy,
}

pub fn save<T: Real>(
    path: &Path,
    params: &ModelParams<T>,
    adam: Option<&AdamState<T>>,
    meta: &CheckpointMeta,
) -> Result<(), CoreError> {
    let header = Header {
        dtype: T::DTYPE.name().to_string(),
        variant: meta.variant.clone(),
        seed: meta.seed,
        config: meta.config.clone(),
        vocab: meta.vocab.clone(),
        hierarchy: meta.hierarchy.clone(),
        tensors: params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        adam: adam.map(|a| AdamMeta {
            step: a.step_count(),
            hyper: a.hyper.clone(),
        }),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, t) in params.iter() {
        T::write_le(t.data(), &mut w)?;
    }
    if let Some(a) = adam {
        for (name, _) in params.iter() {
            let m = a
                .first_moment(name)
                .ok_or_else(|| CoreError::Checkpoint(format!("missing moment for {name}")))?;
            T::write_le(m.data(), &mut w)?;
        }
        for (name, _) in params.iter() {
            let v = a
                .second_moment(name)
                .ok_or_else(|| CoreError::Checkpoint(format!("missing moment for {name}")))?;
            T::write_le(v.data(), &mut w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load<T: Real>(
    path: &Path,
) -> Result<(ModelParams<T>, Option<AdamState<T>>, CheckpointMeta), CoreError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(CoreError::BadMagic);
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    if header.dtype != T::DTYPE.name() {
        return Err(CoreError::DtypeMismatch {
            expected: T::DTYPE.name().to_string(),
            found: header.dtype,
        });
    }

    let mut params = ModelParams::new();
    for entry in &header.tensors {
        let numel: usize = entry.shape.iter().product();
        let mut data = vec![T::ZERO; numel];
        T::read_le(&mut data, &mut r)?;
        params.insert(&entry.name, Tensor::from_vec(entry.shape.clone(), data)?)?;
    }

    let adam = match &header.adam {
        None => None,
        Some(meta) => {
            let mut m = IndexMap::new();
            for entry in &header.tensors {
                let numel: usize = entry.shape.iter().product();
                let mut data = vec![T::ZERO; numel];
                T::read_le(&mut data, &mut r)?;
                m.insert(
                    entry.name.clone(),
                    Tensor::from_vec(entry.shape.clone(), data)?,
                );
            }
            let mut v = IndexMap::new();
            for entry in &header.tensors {
                let numel: usize = entry.shape.iter().product();
                let mut data = vec![T::ZERO; numel];
                T::read_le(&mut data, &mut r)?;
                v.insert(
                    entry.name.clone(),
                    Tensor::from_vec(entry.shape.clone(), data)?,
                );
            }
            Some(AdamState::from_parts(meta.hyper.clone(), meta.step, m, v))
        }
    };

    let meta = CheckpointMeta {
        variant: header.variant,
        seed: header.seed,
        config: header.config,
        vocab: header.vocab,
        hierarchy: header.hierarchy,
    };
    Ok((params, adam, meta))
}
