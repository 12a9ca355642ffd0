//! On-disk formats for models, batches and gradients.
//!
//! Each artifact is a JSON header plus a little-endian `f64` binary blob:
//!
//! - `model.json` / `model.bin`: dims, activation flag; binary holds
//!   `W_0, b_0, W_1, b_1, …` with matrices row-major.
//! - `batch.json` / `batch.bin`: batch size, input dim, class count, labels
//!   (0-based) and an optional raster shape `[channels, height, width]`;
//!   binary holds the inputs row-major per sample.
//! - `grad.json` / `grad.bin`: same binary layout as the model, plus an
//!   optional batch size, an optional raster hint and an optional
//!   availability-mask file (one byte per weight entry, layer by layer).

use super::{Batch, FcnParams, GradMask, GradientBundle};
use crate::linalg::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelHeader {
    pub schema_version: u32,
    pub dims: Vec<usize>,
    pub first_layer_relu: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub byte_order: String,
    pub dtype: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchHeader {
    pub schema_version: u32,
    pub m: usize,
    pub d0: usize,
    pub k: usize,
    pub labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raster: Option<[usize; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GradHeader {
    pub schema_version: u32,
    pub dims: Vec<usize>,
    pub first_layer_relu: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raster: Option<[usize; 3]>,
}

/// Replaces the `.json` extension with `.bin`.
pub fn sibling_bin(json_path: &Path) -> PathBuf {
    json_path.with_extension("bin")
}

fn write_f64s(path: &Path, chunks: &[&[f64]]) -> Result<(), IoError> {
    let mut buf = Vec::new();
    for chunk in chunks {
        for v in *chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&buf).map_err(io_err(path))
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path).map_err(io_err(path))?.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != expected * 8 {
        return Err(IoError::Malformed {
            path: path.to_path_buf(),
            reason: format!("expected {} bytes, found {}", expected * 8, bytes.len()),
        });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn save_model(params: &FcnParams, json_path: &Path, seed: Option<u64>) -> Result<(), IoError> {
    let header = ModelHeader {
        schema_version: SCHEMA_VERSION,
        dims: params.dims().to_vec(),
        first_layer_relu: params.first_layer_relu(),
        seed,
        byte_order: "LE".into(),
        dtype: "f64".into(),
    };
    write_json(json_path, &header)?;
    let bin = sibling_bin(json_path);
    let mut chunks: Vec<&[f64]> = Vec::new();
    for i in 0..=params.h() {
        chunks.push(params.weight(i).data());
        chunks.push(params.bias(i));
    }
    write_f64s(&bin, &chunks)
}

pub fn load_model(json_path: &Path) -> Result<FcnParams, IoError> {
    let header: ModelHeader = read_json(json_path)?;
    if header.dims.len() < 2 {
        return Err(IoError::Malformed {
            path: json_path.to_path_buf(),
            reason: "dims must have at least two entries".into(),
        });
    }
    let total: usize = layer_value_count(&header.dims);
    let bin = sibling_bin(json_path);
    let values = read_f64s(&bin, total)?;
    let (weights, biases) = split_layers(&header.dims, &values);
    FcnParams::new(weights, biases, header.first_layer_relu).map_err(|e| IoError::Malformed {
        path: json_path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn layer_value_count(dims: &[usize]) -> usize {
    (0..dims.len() - 1).map(|i| dims[i + 1] * dims[i] + dims[i + 1]).sum()
}

fn split_layers(dims: &[usize], values: &[f64]) -> (Vec<DenseMatrix>, Vec<Vec<f64>>) {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut at = 0;
    for i in 0..dims.len() - 1 {
        let (rows, cols) = (dims[i + 1], dims[i]);
        weights.push(DenseMatrix::new(rows, cols, values[at..at + rows * cols].to_vec()));
        at += rows * cols;
        biases.push(values[at..at + rows].to_vec());
        at += rows;
    }
    (weights, biases)
}

pub fn save_batch(
    batch: &Batch,
    json_path: &Path,
    raster: Option<[usize; 3]>,
) -> Result<(), IoError> {
    if let Some(shape) = raster {
        let product = shape.iter().product::<usize>();
        if product != batch.input_dim() {
            return Err(IoError::Malformed {
                path: json_path.to_path_buf(),
                reason: format!(
                    "raster shape {shape:?} product {product} does not match input dim {}",
                    batch.input_dim()
                ),
            });
        }
    }
    let header = BatchHeader {
        schema_version: SCHEMA_VERSION,
        m: batch.len(),
        d0: batch.input_dim(),
        k: batch.num_classes,
        labels: batch.labels.clone(),
        raster,
    };
    write_json(json_path, &header)?;
    let chunks: Vec<&[f64]> = batch.inputs.iter().map(|x| x.as_slice()).collect();
    write_f64s(&sibling_bin(json_path), &chunks)
}

pub fn load_batch(json_path: &Path) -> Result<(Batch, Option<[usize; 3]>), IoError> {
    let header: BatchHeader = read_json(json_path)?;
    if header.labels.len() != header.m {
        return Err(IoError::Malformed {
            path: json_path.to_path_buf(),
            reason: format!("{} labels for m = {}", header.labels.len(), header.m),
        });
    }
    let values = read_f64s(&sibling_bin(json_path), header.m * header.d0)?;
    let inputs = values.chunks_exact(header.d0).map(<[f64]>::to_vec).collect();
    Ok((Batch::new(inputs, header.labels, header.k), header.raster))
}

pub fn save_gradient(
    grad: &GradientBundle,
    dims: &[usize],
    first_layer_relu: bool,
    json_path: &Path,
    raster: Option<[usize; 3]>,
) -> Result<(), IoError> {
    let mask_file = grad.mask.as_ref().map(|_| {
        let name = json_path.file_stem().map_or("grad".into(), |s| s.to_string_lossy());
        format!("{name}.mask")
    });
    let header = GradHeader {
        schema_version: SCHEMA_VERSION,
        dims: dims.to_vec(),
        first_layer_relu,
        batch_size: grad.batch_size_hint,
        mask_file: mask_file.clone(),
        raster,
    };
    write_json(json_path, &header)?;
    let mut chunks: Vec<&[f64]> = Vec::new();
    for (w, b) in grad.weight_grads.iter().zip(&grad.bias_grads) {
        chunks.push(w.data());
        chunks.push(b);
    }
    write_f64s(&sibling_bin(json_path), &chunks)?;
    if let (Some(mask), Some(name)) = (&grad.mask, mask_file) {
        let path = json_path.with_file_name(name);
        let mut bytes = Vec::new();
        for layer in &mask.weights {
            bytes.extend_from_slice(layer);
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_gradient(
    json_path: &Path,
) -> Result<(GradientBundle, Vec<usize>, bool, Option<[usize; 3]>), IoError> {
    let header: GradHeader = read_json(json_path)?;
    let values = read_f64s(&sibling_bin(json_path), layer_value_count(&header.dims))?;
    let (weights, biases) = split_layers(&header.dims, &values);
    let mask = match &header.mask_file {
        None => None,
        Some(name) => {
            let path = json_path.with_file_name(name);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let expected: usize =
                (0..header.dims.len() - 1).map(|i| header.dims[i + 1] * header.dims[i]).sum();
            if bytes.len() != expected {
                return Err(IoError::Malformed {
                    path,
                    reason: format!("mask has {} bytes, expected {expected}", bytes.len()),
                });
            }
            let mut layers = Vec::new();
            let mut at = 0;
            for i in 0..header.dims.len() - 1 {
                let n = header.dims[i + 1] * header.dims[i];
                layers.push(bytes[at..at + n].to_vec());
                at += n;
            }
            Some(GradMask { weights: layers })
        }
    };
    let bundle = GradientBundle {
        weight_grads: weights,
        bias_grads: biases,
        mask,
        batch_size_hint: header.batch_size,
    };
    Ok((bundle, header.dims, header.first_layer_relu, header.raster))
}
