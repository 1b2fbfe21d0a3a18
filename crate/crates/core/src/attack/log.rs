use serde::{Deserialize, Serialize};

use super::{AttackResult, Method};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlipKind {
    #[serde(rename = "add")]
    Add,
    #[serde(rename = "del")]
    Delete,
}

/// One undirected edge flip, stored with `u < v` and serialised as
/// `[u, v, "add" | "del"]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flip(pub usize, pub usize, pub FlipKind);

impl Flip {
    pub fn new(u: usize, v: usize, kind: FlipKind) -> Self {
        Flip(u.min(v), u.max(v), kind)
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn kind(&self) -> FlipKind {
        self.2
    }
}

/// One changed feature entry, serialised as `[node, feature, delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta(pub usize, pub usize, pub f64);

/// Per-graph record of an attack, written next to the result tables and
/// read back by the audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipLog {
    pub graph_id: usize,
    pub fold: usize,
    pub method: Method,
    pub column_used: Option<usize>,
    pub flips: Vec<Flip>,
    pub feature_deltas: Vec<FeatureDelta>,
    pub success: bool,
    pub skipped: bool,
    /// Whether the evaluated model classifies the perturbed graph correctly.
    pub victim_correct_after: bool,
    pub selected_nodes: Vec<usize>,
    pub subgraph_nodes: Option<Vec<usize>>,
}

impl FlipLog {
    pub fn from_result<T: Scalar>(graph_id: usize, fold: usize, result: &AttackResult<T>, victim_correct_after: bool) -> Self {
        Self {
            graph_id,
            fold,
            method: result.method,
            column_used: result.column_used,
            flips: result.flips.clone(),
            feature_deltas: result.feature_deltas.clone(),
            success: result.success,
            skipped: result.skipped,
            victim_correct_after,
            selected_nodes: result.selected_nodes.clone(),
            subgraph_nodes: result.subgraph_nodes.clone(),
        }
    }
}
