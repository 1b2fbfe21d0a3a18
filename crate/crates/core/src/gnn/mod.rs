//! GCN and GIN-0 graph classifiers with sum-pooling readout and a single
//! linear output layer.

mod checkpoint;
mod diagnostics;
mod forward;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use diagnostics::check_model_gradients;
pub use forward::{
    argmax, forward, forward_dense, forward_on_tape, forward_relaxed, forward_with_param_vars, logits,
    normalize_adjacency, predict, propagation_matrix, relaxed_propagation, ForwardTrace, Propagation, Readout, TapeForward,
};
pub use optim::Adam;
pub use train::{evaluate, train, train_fold, BatchInput, TrainConfig, TrainOutcome};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("cannot evaluate on an empty graph list")]
    EmptyEvaluation,
    #[error("fold {fold} out of range for {folds} folds")]
    BadFold { fold: usize, folds: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gin0,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Gin0 => "gin0",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gin0" | "gin-0" | "gin" => Ok(Arch::Gin0),
            other => Err(format!("unknown architecture {other:?} (expected gcn or gin0)")),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weights of one convolution. GCN: a single `Θ` and no bias. GIN-0: the
/// two linear maps of its MLP, each with a `1×H` bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array2<T>>,
}

/// Trained (or freshly initialised) classifier parameters.
///
/// Every convolution outputs `hidden_dim` columns, so `out_weight` is
/// `num_classes × hidden_dim` and the Grad-CAM width condition holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Arch,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<ConvLayer<T>>,
    pub out_weight: Array2<T>,
    pub out_bias: Array2<T>,
}

fn glorot<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-bound..bound)))
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform weights and zero biases under `seed`.
    pub fn init(arch: Arch, input_dim: usize, hidden_dim: usize, num_layers: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let fan_in = if l == 0 { input_dim } else { hidden_dim };
            let layer = match arch {
                Arch::Gcn => ConvLayer { weights: vec![glorot(fan_in, hidden_dim, &mut rng)], biases: vec![] },
                Arch::Gin0 => ConvLayer {
                    weights: vec![glorot(fan_in, hidden_dim, &mut rng), glorot(hidden_dim, hidden_dim, &mut rng)],
                    biases: vec![Array2::zeros((1, hidden_dim)), Array2::zeros((1, hidden_dim))],
                },
            };
            layers.push(layer);
        }
        Self {
            arch,
            input_dim,
            hidden_dim,
            num_classes,
            layers,
            out_weight: glorot(num_classes, hidden_dim, &mut rng),
            out_bias: Array2::zeros((1, num_classes)),
        }
    }

    /// Converts every tensor to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let conv = |a: &Array2<T>| a.mapv(|x| U::lit(x.as_f64()));
        ModelParams {
            arch: self.arch,
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            num_classes: self.num_classes,
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer { weights: l.weights.iter().map(conv).collect(), biases: l.biases.iter().map(conv).collect() })
                .collect(),
            out_weight: conv(&self.out_weight),
            out_bias: conv(&self.out_bias),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// All tensors in canonical order: per layer its weights then biases,
    /// then the output weight and bias.
    pub fn tensors(&self) -> Vec<&Array2<T>> {
        let mut out: Vec<&Array2<T>> = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.biases.iter());
        }
        out.push(&self.out_weight);
        out.push(&self.out_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<T>> {
        let mut out: Vec<&mut Array2<T>> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.weights.iter_mut());
            out.extend(layer.biases.iter_mut());
        }
        out.push(&mut self.out_weight);
        out.push(&mut self.out_bias);
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend((0..layer.weights.len()).map(|k| format!("conv{l}.weight{k}")));
            out.extend((0..layer.biases.len()).map(|k| format!("conv{l}.bias{k}")));
        }
        out.push("out.weight".into());
        out.push("out.bias".into());
        out
    }

    /// Checks every tensor shape against the declared dimensions.
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |what: String| Err(GnnError::Dimension(what));
        if self.out_weight.dim() != (self.num_classes, self.hidden_dim) {
            return bad(format!("out weight {:?}", self.out_weight.dim()));
        }
        if self.out_bias.dim() != (1, self.num_classes) {
            return bad(format!("out bias {:?}", self.out_bias.dim()));
        }
        let (nw, nb) = match self.arch {
            Arch::Gcn => (1, 0),
            Arch::Gin0 => (2, 2),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != nw || layer.biases.len() != nb {
                return bad(format!("layer {l} tensor count"));
            }
            let fan_in = if l == 0 { self.input_dim } else { self.hidden_dim };
            if layer.weights[0].dim() != (fan_in, self.hidden_dim) {
                return bad(format!("layer {l} weight {:?}", layer.weights[0].dim()));
            }
            for w in &layer.weights[1..] {
                if w.dim() != (self.hidden_dim, self.hidden_dim) {
                    return bad(format!("layer {l} inner weight {:?}", w.dim()));
                }
            }
            for b in &layer.biases {
                if b.dim() != (1, self.hidden_dim) {
                    return bad(format!("layer {l} bias {:?}", b.dim()));
                }
            }
        }
        Ok(())
    }
}
