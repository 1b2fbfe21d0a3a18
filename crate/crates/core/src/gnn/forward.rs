use std::rc::Rc;

use ndarray::Array2;

use super::{Arch, GnnError, ModelParams};
use crate::autodiff::{SparseMatrix, Tape, Var};
use crate::graph::Graph;
use crate::Scalar;

/// Symmetric renormalisation `D̃^{-1/2}(A+I)D̃^{-1/2}` with `D̃` the degree
/// matrix of `A+I`. Accepts real-valued (relaxed) adjacency.
pub fn normalize_adjacency<T: Scalar>(adjacency: &Array2<T>) -> Array2<T> {
    let n = adjacency.nrows();
    let mut a = adjacency.clone();
    for i in 0..n {
        a[[i, i]] += T::one();
    }
    let dinv: Vec<T> = a.rows().into_iter().map(|r| r.sum().powf(T::lit(-0.5))).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] * dinv[i] * dinv[j])
}

/// The aggregation operator each architecture multiplies hidden states by:
/// normalised `Â` for GCN, `A+I` (sum aggregation, ε = 0) for GIN-0.
pub fn propagation_matrix<T: Scalar>(arch: Arch, adjacency: &Array2<T>) -> Array2<T> {
    match arch {
        Arch::Gcn => normalize_adjacency(adjacency),
        Arch::Gin0 => {
            let mut a = adjacency.clone();
            for i in 0..a.nrows() {
                a[[i, i]] += T::one();
            }
            a
        }
    }
}

/// Records the propagation operator for a differentiable adjacency `adj`.
/// GCN renormalises on the tape; GIN-0 adds the identity.
pub fn relaxed_propagation<T: Scalar>(tape: &mut Tape<T>, arch: Arch, adj: Var) -> Result<Var, GnnError> {
    let n = tape.value(adj).nrows();
    let eye = tape.constant(Array2::eye(n));
    let with_self = tape.add(adj, eye)?;
    match arch {
        Arch::Gin0 => Ok(with_self),
        Arch::Gcn => {
            let deg = tape.sum_cols(with_self)?;
            let dinv = tape.powf(deg, T::lit(-0.5))?;
            let dinv_t = tape.transpose(dinv)?;
            let outer = tape.matmul(dinv, dinv_t)?;
            Ok(tape.hadamard(with_self, outer)?)
        }
    }
}

pub enum Propagation<T> {
    /// Operator already on the tape (constant or differentiable).
    Dense(Var),
    /// Constant block-diagonal operator for a batch of graphs.
    Sparse(Rc<SparseMatrix<T>>),
}

pub enum Readout {
    /// Whole input is one graph.
    Sum,
    /// Row ranges `offsets[k]..offsets[k+1]` are graph `k`.
    Segments(Rc<Vec<usize>>),
}

/// Handles into the tape for one forward pass.
#[derive(Debug, Clone)]
pub struct TapeForward {
    pub hidden: Vec<Var>,
    pub pooled: Var,
    pub logits: Var,
    pub params: Vec<Var>,
}

/// Records `h^(l)` for every layer, the sum-pooled embedding and the logits.
/// Parameters are added to the tape as fresh leaves.
pub fn forward_on_tape<T: Scalar>(
    params: &ModelParams<T>,
    tape: &mut Tape<T>,
    features: Var,
    propagation: &Propagation<T>,
    readout: &Readout,
    params_require_grad: bool,
) -> Result<TapeForward, GnnError> {
    let param_vars: Vec<Var> =
        params.tensors().into_iter().map(|t| tape.leaf(t.clone(), params_require_grad)).collect();
    forward_with_param_vars(params, tape, features, propagation, readout, param_vars)
}

/// Like [`forward_on_tape`] but with parameters already on the tape, in the
/// order of [`ModelParams::tensors`]. Only `params`' architecture and
/// dimensions are read.
pub fn forward_with_param_vars<T: Scalar>(
    params: &ModelParams<T>,
    tape: &mut Tape<T>,
    features: Var,
    propagation: &Propagation<T>,
    readout: &Readout,
    param_vars: Vec<Var>,
) -> Result<TapeForward, GnnError> {
    let x = tape.value(features);
    if x.ncols() != params.input_dim {
        return Err(GnnError::Dimension(format!(
            "features have {} columns, model expects {}",
            x.ncols(),
            params.input_dim
        )));
    }
    let expected = params.tensors().len();
    if param_vars.len() != expected {
        return Err(GnnError::Dimension(format!("{} parameter vars, expected {expected}", param_vars.len())));
    }
    let mut next = param_vars.iter().copied();
    let mut h = features;
    let mut hidden = Vec::with_capacity(params.num_layers());
    for _ in 0..params.num_layers() {
        let agg = match propagation {
            Propagation::Dense(op) => tape.matmul(*op, h)?,
            Propagation::Sparse(op) => tape.sparse_matmul(op.clone(), h)?,
        };
        h = match params.arch {
            Arch::Gcn => {
                let w = next.next().unwrap();
                let z = tape.matmul(agg, w)?;
                tape.relu(z)?
            }
            Arch::Gin0 => {
                let (w1, w2) = (next.next().unwrap(), next.next().unwrap());
                let (b1, b2) = (next.next().unwrap(), next.next().unwrap());
                let z1 = tape.matmul(agg, w1)?;
                let z1 = tape.add_row(z1, b1)?;
                let a1 = tape.relu(z1)?;
                let z2 = tape.matmul(a1, w2)?;
                let z2 = tape.add_row(z2, b2)?;
                tape.relu(z2)?
            }
        };
        hidden.push(h);
    }
    let pooled = match readout {
        Readout::Sum => tape.sum_rows(h)?,
        Readout::Segments(offsets) => tape.segment_sum(h, offsets.clone())?,
    };
    let (w, b) = (next.next().unwrap(), next.next().unwrap());
    let wt = tape.transpose(w)?;
    let z = tape.matmul(pooled, wt)?;
    let logits = tape.add_row(z, b)?;
    Ok(TapeForward { hidden, pooled, logits, params: param_vars })
}

/// A single-graph forward pass that keeps its tape, so hidden states and
/// gradients with respect to them can be read afterwards.
#[derive(Debug)]
pub struct ForwardTrace<T> {
    pub tape: Tape<T>,
    pub features: Var,
    pub adjacency: Var,
    pub out: TapeForward,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn hidden(&self, layer: usize) -> &Array2<T> {
        self.tape.value(self.out.hidden[layer])
    }

    pub fn last_hidden(&self) -> &Array2<T> {
        self.tape.value(*self.out.hidden.last().unwrap())
    }

    pub fn graph_embedding(&self) -> Vec<T> {
        self.tape.value(self.out.pooled).row(0).to_vec()
    }

    pub fn logits(&self) -> Vec<T> {
        self.tape.value(self.out.logits).row(0).to_vec()
    }

    pub fn prediction(&self) -> usize {
        argmax(&self.logits())
    }
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Forward pass on explicit matrices. Both the feature matrix and the
/// (possibly real-valued) adjacency are differentiable leaves.
pub fn forward_dense<T: Scalar>(
    params: &ModelParams<T>,
    features: &Array2<T>,
    adjacency: &Array2<T>,
) -> Result<ForwardTrace<T>, GnnError> {
    if adjacency.nrows() != features.nrows() || adjacency.ncols() != features.nrows() {
        return Err(GnnError::Dimension(format!(
            "adjacency {:?} for {} nodes",
            adjacency.dim(),
            features.nrows()
        )));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(features.clone(), true);
    let a = tape.leaf(adjacency.clone(), true);
    let op = relaxed_propagation(&mut tape, params.arch, a)?;
    let out = forward_on_tape(params, &mut tape, x, &Propagation::Dense(op), &Readout::Sum, false)?;
    Ok(ForwardTrace { tape, features: x, adjacency: a, out })
}

pub fn forward<T: Scalar>(params: &ModelParams<T>, graph: &Graph<T>) -> Result<ForwardTrace<T>, GnnError> {
    forward_dense(params, &graph.features, &graph.adjacency())
}

/// Records a forward pass on an existing tape with a differentiable
/// adjacency (used by mask optimisation and GradArgmax).
pub fn forward_relaxed<T: Scalar>(
    params: &ModelParams<T>,
    tape: &mut Tape<T>,
    features: Var,
    adjacency: Var,
) -> Result<TapeForward, GnnError> {
    let op = relaxed_propagation(tape, params.arch, adjacency)?;
    forward_on_tape(params, tape, features, &Propagation::Dense(op), &Readout::Sum, false)
}

/// Logits without keeping gradients around.
pub fn logits<T: Scalar>(params: &ModelParams<T>, graph: &Graph<T>) -> Result<Vec<T>, GnnError> {
    let mut tape = Tape::new();
    let x = tape.constant(graph.features.clone());
    // same arithmetic as `forward`, so predictions from both always agree
    let a = tape.constant(graph.adjacency());
    let op = relaxed_propagation(&mut tape, params.arch, a)?;
    let out = forward_on_tape(params, &mut tape, x, &Propagation::Dense(op), &Readout::Sum, false)?;
    Ok(tape.value(out.logits).row(0).to_vec())
}

pub fn predict<T: Scalar>(params: &ModelParams<T>, graph: &Graph<T>) -> Result<usize, GnnError> {
    Ok(argmax(&logits(params, graph)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn normalisation_examples() {
        assert_eq!(normalize_adjacency(&array![[0.0]]), array![[1.0]]);
        for x in normalize_adjacency(&array![[0.0, 1.0], [1.0, 0.0]]) {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-15);
        }

        // path 0-1-2: degrees of A+I are 2, 3, 2
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let d = [2.0f64, 3.0, 2.0];
        let ai = &a + &Array2::<f64>::eye(3);
        let got = normalize_adjacency(&a);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(got[[i, j]], ai[[i, j]] / (d[i] * d[j]).sqrt(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn relaxed_normalisation_matches_direct() {
        let a = array![[0.0, 0.3, 1.0], [0.3, 0.0, 0.6], [1.0, 0.6, 0.0]];
        let mut tape = Tape::new();
        let v = tape.constant(a.clone());
        let op = relaxed_propagation(&mut tape, Arch::Gcn, v).unwrap();
        let direct = normalize_adjacency(&a);
        for (x, y) in tape.value(op).iter().zip(direct.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn argmax_ties_to_smallest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }
}
