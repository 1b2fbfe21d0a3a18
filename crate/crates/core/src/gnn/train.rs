use std::rc::Rc;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::forward::{forward_on_tape, predict, propagation_matrix, Propagation, Readout};
use super::{Adam, Arch, GnnError, ModelParams};
use crate::autodiff::{SparseMatrix, Tape};
use crate::graph::{Dataset, FoldSplit, Graph};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, lr: 0.01, hidden_dim: 64, num_layers: 5, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    /// Mean cross-entropy at each epoch, measured before that epoch's update.
    pub losses: Vec<T>,
}

/// A batch of graphs stacked into one block-diagonal system.
#[derive(Debug, Clone)]
pub struct BatchInput<T> {
    pub propagation: Rc<SparseMatrix<T>>,
    pub features: Array2<T>,
    pub offsets: Rc<Vec<usize>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> BatchInput<T> {
    pub fn new(arch: Arch, graphs: &[&Graph<T>]) -> Result<Self, GnnError> {
        if graphs.is_empty() {
            return Err(GnnError::EmptyTrainingSet);
        }
        let dim = graphs[0].feature_dim();
        if let Some(g) = graphs.iter().find(|g| g.feature_dim() != dim) {
            return Err(GnnError::Dimension(format!("graph {} has {} feature columns, expected {dim}", g.id, g.feature_dim())));
        }
        let blocks: Vec<Array2<T>> = graphs.iter().map(|g| propagation_matrix(arch, &g.adjacency())).collect();
        let propagation = Rc::new(SparseMatrix::block_diagonal(blocks.iter()));
        let views: Vec<_> = graphs.iter().map(|g| g.features.view()).collect();
        let features = concatenate(Axis(0), &views).expect("feature widths checked above");
        let mut offsets = vec![0];
        for g in graphs {
            offsets.push(offsets.last().unwrap() + g.num_nodes());
        }
        Ok(Self { propagation, features, offsets: Rc::new(offsets), labels: graphs.iter().map(|g| g.label).collect() })
    }
}

/// Full-batch training with Adam on mean cross-entropy. Returns the
/// parameters after the last epoch.
pub fn train<T: Scalar>(
    arch: Arch,
    graphs: &[&Graph<T>],
    num_classes: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, GnnError> {
    let batch = BatchInput::new(arch, graphs)?;
    if let Some(&l) = batch.labels.iter().find(|&&l| l >= num_classes) {
        return Err(GnnError::Dimension(format!("label {l} with {num_classes} classes")));
    }
    let mut params = ModelParams::init(
        arch,
        batch.features.ncols(),
        config.hidden_dim,
        config.num_layers,
        num_classes,
        config.seed,
    );
    let mut adam = Adam::new(config.lr);
    let mut losses = Vec::with_capacity(config.epochs);
    let propagation = Propagation::Sparse(batch.propagation.clone());
    let readout = Readout::Segments(batch.offsets.clone());
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(batch.features.clone());
        let out = forward_on_tape(&params, &mut tape, x, &propagation, &readout, true)?;
        let loss = tape.softmax_cross_entropy(out.logits, &batch.labels)?;
        losses.push(tape.scalar(loss));
        tape.backward(loss)?;
        let grads = out.params.iter().map(|&v| tape.grad_of(v)).collect::<Result<Vec<_>, _>>()?;
        adam.step(&mut params.tensors_mut(), &grads);
    }
    Ok(TrainOutcome { params, losses })
}

/// Trains on every fold except `fold`.
pub fn train_fold<T: Scalar>(
    dataset: &Dataset<T>,
    folds: &FoldSplit,
    fold: usize,
    arch: Arch,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, GnnError> {
    if fold >= folds.fold_count {
        return Err(GnnError::BadFold { fold, folds: folds.fold_count });
    }
    let graphs = dataset.subset(&folds.train_indices(fold));
    train(arch, &graphs, dataset.num_classes, config)
}

/// Fraction of graphs whose predicted class equals their label.
pub fn evaluate<T: Scalar>(params: &ModelParams<T>, graphs: &[&Graph<T>]) -> Result<f64, GnnError> {
    if graphs.is_empty() {
        return Err(GnnError::EmptyEvaluation);
    }
    let mut correct = 0;
    for g in graphs {
        if predict(params, g)? == g.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / graphs.len() as f64)
}
