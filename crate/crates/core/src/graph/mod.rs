//! Graphs, datasets and the TUDataset text format.

mod features;
mod folds;
mod tu;

pub use features::build_features;
pub use folds::{split_folds, FoldSplit};
pub use tu::{load_tu_dataset, write_tu_dataset};

use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing required file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}:{line}: unknown node id {node}")]
    UnknownNode { file: String, line: usize, node: usize },
    #[error("{file}:{line}: edge ({u}, {v}) has no reverse pair ({v}, {u})")]
    AsymmetricEdge { file: String, line: usize, u: usize, v: usize },
    #[error("{file}:{line}: self-loop on node {node}")]
    SelfLoop { file: String, line: usize, node: usize },
    #[error("{file}:{line}: edge ({u}, {v}) joins nodes of different graphs")]
    CrossGraphEdge { file: String, line: usize, u: usize, v: usize },
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("node label {0} was not seen when the encoder was fitted")]
    UnseenLabel(usize),
    #[error("feature policy {policy:?} needs {what}")]
    PolicyUnsatisfied { policy: FeaturePolicy, what: &'static str },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cannot split {graphs} graphs into {k} folds")]
    FoldCount { k: usize, graphs: usize },
}

/// How node features are built from the raw TU files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePolicy {
    OneHotLabel,
    LabelPlusAttributes,
    ScalarDegree,
}

/// Undirected simple graph with node features and a class label.
///
/// Edges are kept as a sorted list of `(u, v)` with `u < v`; the adjacency is
/// therefore symmetric and hollow by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    pub id: usize,
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    pub features: Array2<T>,
    pub label: usize,
    /// Contiguous node-label index per node, kept for TU round trips.
    pub node_labels: Option<Vec<usize>>,
    pub node_attributes: Option<Array2<T>>,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph from undirected edges given in either orientation.
    /// Duplicates collapse; self-loops and out-of-range endpoints are errors.
    pub fn new<I>(id: usize, n: usize, edges: I, features: Array2<T>, label: usize) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(GraphError::InvalidGraph(format!("graph {id} has no nodes")));
        }
        if features.nrows() != n {
            return Err(GraphError::InvalidGraph(format!(
                "graph {id}: {} feature rows for {n} nodes",
                features.nrows()
            )));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::InvalidGraph(format!("graph {id}: edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(GraphError::InvalidGraph(format!("graph {id}: self-loop on {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();
        let mut degrees = vec![0; n];
        for &(u, v) in &list {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        Ok(Self { id, n, edges: list, degrees, features, label, node_labels: None, node_attributes: None })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = T::one();
            a[[v, u]] = T::one();
        }
        a
    }

    /// Copy with each listed pair toggled (present → removed, absent → added).
    pub fn with_flipped(&self, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut set: std::collections::BTreeSet<(usize, usize)> = self.edges.iter().copied().collect();
        for &(u, v) in pairs {
            if u == v || u >= self.n || v >= self.n {
                return Err(GraphError::InvalidGraph(format!("cannot flip ({u}, {v})")));
            }
            let key = (u.min(v), u.max(v));
            if !set.remove(&key) {
                set.insert(key);
            }
        }
        let mut g = Self::new(self.id, self.n, set, self.features.clone(), self.label)?;
        g.node_labels = self.node_labels.clone();
        g.node_attributes = self.node_attributes.clone();
        Ok(g)
    }

    pub fn with_features(&self, features: Array2<T>) -> Result<Self, GraphError> {
        if features.dim() != self.features.dim() {
            return Err(GraphError::InvalidGraph(format!(
                "feature shape {:?} does not match {:?}",
                features.dim(),
                self.features.dim()
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    /// Same graph with nodes renamed by `perm` (old node `i` becomes `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        if perm.len() != self.n {
            return Err(GraphError::InvalidGraph("permutation length".into()));
        }
        let mut features = Array2::zeros(self.features.dim());
        for (old, &new) in perm.iter().enumerate() {
            features.row_mut(new).assign(&self.features.row(old));
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        Self::new(self.id, self.n, edges, features, self.label)
    }
}

/// An ordered collection of labelled graphs with a shared feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    pub graphs: Vec<Graph<T>>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub feature_policy: FeaturePolicy,
    /// Raw graph-label values in sorted order; index = class id.
    pub graph_label_values: Vec<i64>,
    /// Raw node-label values in sorted order; index = one-hot position.
    pub node_label_values: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub classes: usize,
    pub mean_nodes: f64,
    pub mean_edges: f64,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&Graph<T>> {
        indices.iter().map(|&i| &self.graphs[i]).collect()
    }

    /// Checks the structural invariants of every graph.
    pub fn validate(&self) -> Result<(), GraphError> {
        for g in &self.graphs {
            if g.label >= self.num_classes {
                return Err(GraphError::InvalidGraph(format!("graph {} label {} >= {}", g.id, g.label, self.num_classes)));
            }
            if g.feature_dim() != self.feature_dim {
                return Err(GraphError::InvalidGraph(format!("graph {} feature dim", g.id)));
            }
            let a = g.adjacency();
            for u in 0..g.num_nodes() {
                if a[[u, u]] != T::zero() {
                    return Err(GraphError::InvalidGraph(format!("graph {} not hollow", g.id)));
                }
                for v in 0..g.num_nodes() {
                    if a[[u, v]] != a[[v, u]] {
                        return Err(GraphError::InvalidGraph(format!("graph {} not symmetric", g.id)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Graph count, class count, mean node count and mean undirected edge count.
    pub fn stats(&self) -> Result<DatasetStats, GraphError> {
        graph_stats(&self.graphs, self.num_classes)
    }
}

pub fn graph_stats<T: Scalar>(graphs: &[Graph<T>], classes: usize) -> Result<DatasetStats, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let count = graphs.len() as f64;
    let nodes: usize = graphs.iter().map(Graph::num_nodes).sum();
    let edges: usize = graphs.iter().map(Graph::num_edges).sum();
    Ok(DatasetStats {
        graphs: graphs.len(),
        classes,
        mean_nodes: nodes as f64 / count,
        mean_edges: edges as f64 / count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph<f64> {
        Graph::new(0, n, (1..n).map(|i| (i - 1, i)), Array2::zeros((n, 1)), 0).unwrap()
    }

    #[test]
    fn construction_normalizes_edges() {
        let g = Graph::new(3, 3, [(1, 0), (0, 1), (2, 1)], Array2::<f64>::zeros((3, 2)), 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.degrees(), &[1, 2, 1]);
        assert!(g.has_edge(1, 0) && !g.has_edge(0, 2) && !g.has_edge(1, 1));
        let a = g.adjacency();
        assert_eq!(a, a.t());
    }

    #[test]
    fn rejects_bad_graphs() {
        let x = Array2::<f64>::zeros((2, 1));
        assert!(Graph::new(0, 2, [(0, 0)], x.clone(), 0).is_err());
        assert!(Graph::new(0, 2, [(0, 2)], x.clone(), 0).is_err());
        assert!(Graph::new(0, 3, [(0, 1)], x.clone(), 0).is_err());
        assert!(Graph::new(0, 0, [], Array2::<f64>::zeros((0, 1)), 0).is_err());
    }

    #[test]
    fn flipping_toggles_pairs() {
        let g = path(3);
        let h = g.with_flipped(&[(1, 0), (2, 0)]).unwrap();
        assert_eq!(h.edges(), &[(0, 2), (1, 2)]);
        assert!(g.with_flipped(&[(1, 1)]).is_err());
    }

    #[test]
    fn stats_examples() {
        let g1 = path(1);
        let g3 = path(3);
        let s = graph_stats(&[g1, g3], 2).unwrap();
        assert_eq!(s.mean_nodes, 2.0);
        assert_eq!(s.mean_edges, 1.0);
        assert!(matches!(graph_stats::<f64>(&[], 2), Err(GraphError::EmptyDataset)));
    }
}
