use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Arch, ConvLayer, GnnError, ModelParams};
use crate::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    arch: Arch,
    input_dim: usize,
    hidden_dim: usize,
    num_layers: usize,
    num_classes: usize,
    tensors: Vec<TensorRecord>,
}

/// Writes parameters as JSON with row-major tensors. f64 values round-trip
/// bit-exactly.
pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<(), GnnError> {
    let mut tensors = Vec::new();
    for (name, t) in params.tensor_names().into_iter().zip(params.tensors()) {
        let data: Vec<f64> = t.iter().map(|x| x.as_f64()).collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(GnnError::Checkpoint(format!("tensor {name} holds a non-finite value")));
        }
        tensors.push(TensorRecord { name, rows: t.nrows(), cols: t.ncols(), data });
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        arch: params.arch,
        input_dim: params.input_dim,
        hidden_dim: params.hidden_dim,
        num_layers: params.num_layers(),
        num_classes: params.num_classes,
        tensors,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelParams<T>, GnnError> {
    let file: CheckpointFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(GnnError::Checkpoint(format!("unsupported version {}", file.version)));
    }
    let mut records = file.tensors.into_iter();
    let mut take = |expected: String| -> Result<Array2<T>, GnnError> {
        let r = records.next().ok_or_else(|| GnnError::Checkpoint(format!("missing tensor {expected}")))?;
        if r.name != expected {
            return Err(GnnError::Checkpoint(format!("expected tensor {expected}, found {}", r.name)));
        }
        if r.data.len() != r.rows * r.cols {
            return Err(GnnError::Checkpoint(format!("tensor {} has {} values for {}x{}", r.name, r.data.len(), r.rows, r.cols)));
        }
        Ok(Array2::from_shape_vec((r.rows, r.cols), r.data.into_iter().map(T::lit).collect()).unwrap())
    };
    let (nw, nb) = match file.arch {
        Arch::Gcn => (1, 0),
        Arch::Gin0 => (2, 2),
    };
    let mut layers = Vec::with_capacity(file.num_layers);
    for l in 0..file.num_layers {
        let weights = (0..nw).map(|k| take(format!("conv{l}.weight{k}"))).collect::<Result<_, _>>()?;
        let biases = (0..nb).map(|k| take(format!("conv{l}.bias{k}"))).collect::<Result<_, _>>()?;
        layers.push(ConvLayer { weights, biases });
    }
    let out_weight = take("out.weight".into())?;
    let out_bias = take("out.bias".into())?;
    if records.next().is_some() {
        return Err(GnnError::Checkpoint("trailing tensors".into()));
    }
    let params = ModelParams {
        arch: file.arch,
        input_dim: file.input_dim,
        hidden_dim: file.hidden_dim,
        num_classes: file.num_classes,
        layers,
        out_weight,
        out_bias,
    };
    params.validate()?;
    Ok(params)
}
