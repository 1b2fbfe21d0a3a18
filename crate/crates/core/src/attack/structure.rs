use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{misclassifies, AttackError, AttackResult, Budget, Flip, FlipKind, Method};
use crate::cam::RankedCamMatrix;
use crate::gnn::{forward, ForwardTrace, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

/// Edges may be inserted between nodes with similarity at most `s1` and
/// deleted between nodes with similarity at least `s2`. Similarity is the
/// cosine of the nodes' embeddings at hidden layer `embedding_layer`
/// (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConstraint {
    pub s1: f64,
    pub s2: f64,
    pub embedding_layer: usize,
}

impl Default for SimilarityConstraint {
    fn default() -> Self {
        Self { s1: 1.0, s2: 0.95, embedding_layer: 1 }
    }
}

impl SimilarityConstraint {
    /// Whether flipping a pair with the given current state is admissible.
    pub fn admits(&self, edge_present: bool, similarity: f64) -> bool {
        if edge_present {
            similarity >= self.s2
        } else {
            similarity <= self.s1
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.s1.is_finite() && self.s2.is_finite()) {
            return Err(AttackError::Budget(format!("similarity thresholds must be finite: {} {}", self.s1, self.s2)));
        }
        if self.embedding_layer == 0 {
            return Err(AttackError::Budget("embedding layer is 1-based".into()));
        }
        Ok(())
    }
}

/// Pairwise cosine similarity of the rows of hidden layer `layer` (1-based).
/// Rows that are entirely zero have similarity 0 with everything.
pub fn similarity_matrix<T: Scalar>(trace: &ForwardTrace<T>, layer: usize) -> Result<Array2<T>, AttackError> {
    if layer == 0 || layer > trace.out.hidden.len() {
        return Err(AttackError::Budget(format!("no hidden layer {layer}")));
    }
    Ok(cosine_similarity(trace.hidden(layer - 1)))
}

pub(crate) fn cosine_similarity<T: Scalar>(h: &Array2<T>) -> Array2<T> {
    let n = h.nrows();
    let norms: Vec<T> = h.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let gram = h.dot(&h.t());
    Array2::from_shape_fn((n, n), |(u, v)| {
        if norms[u] == T::zero() || norms[v] == T::zero() {
            T::zero()
        } else {
            (gram[[u, v]] / (norms[u] * norms[v])).max(-T::one()).min(T::one())
        }
    })
}

/// Flips chosen for one ranked column: each new node, in ranking order, is
/// paired with every earlier node in the order they were added, and each
/// admissible pair is flipped until `max_flips` is spent.
pub fn cama_structure_column<T: Scalar>(
    graph: &Graph<T>,
    column: &[usize],
    similarity: &Array2<T>,
    max_flips: usize,
    constraint: &SimilarityConstraint,
) -> Vec<Flip> {
    let mut flips = Vec::new();
    let Some(&first) = column.first() else { return flips };
    let mut targets = vec![first];
    for &u in &column[1..] {
        if flips.len() >= max_flips {
            break;
        }
        for &v in &targets {
            let present = graph.has_edge(u, v);
            if constraint.admits(present, similarity[[u, v]].as_f64()) {
                let kind = if present { FlipKind::Delete } else { FlipKind::Add };
                flips.push(Flip::new(u, v, kind));
                if flips.len() == max_flips {
                    break;
                }
            }
        }
        targets.push(u);
    }
    flips
}

pub(crate) fn apply_flips<T: Scalar>(graph: &Graph<T>, flips: &[Flip]) -> Result<Graph<T>, AttackError> {
    let pairs: Vec<(usize, usize)> = flips.iter().map(Flip::pair).collect();
    Ok(graph.with_flipped(&pairs)?)
}

pub(crate) fn structure_result<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    method: Method,
    flips: Vec<Flip>,
) -> Result<AttackResult<T>, AttackError> {
    let perturbed = apply_flips(graph, &flips)?;
    let success = misclassifies(params, &perturbed)?;
    let mut result = AttackResult::unchanged(method, graph, false);
    result.perturbed = perturbed;
    result.flips = flips;
    result.success = success;
    Ok(result)
}

/// Runs [`cama_structure_column`] on each ranked column in turn with the
/// similarity matrix of the clean graph; the first column that fools
/// `params` wins, otherwise the last column's flips are returned.
pub fn cama_structure<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    ranked: &RankedCamMatrix,
    budget: &Budget,
    constraint: &SimilarityConstraint,
) -> Result<AttackResult<T>, AttackError> {
    constraint.validate()?;
    let trace = forward(params, graph)?;
    let similarity = similarity_matrix(&trace, constraint.embedding_layer)?;
    let mut last = None;
    for c in 0..ranked.num_columns() {
        let flips = cama_structure_column(graph, ranked.column(c), &similarity, budget.edges, constraint);
        let mut result = structure_result(params, graph, Method::Cama, flips)?;
        result.column_used = Some(c);
        if result.success {
            return Ok(result);
        }
        last = Some(result);
    }
    Ok(last.expect("ranked matrix has at least one column"))
}
