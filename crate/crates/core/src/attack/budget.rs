use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::graph::Graph;
use crate::Scalar;

/// Fractions from which per-graph budgets are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetFractions {
    pub edge_frac: f64,
    pub node_frac: f64,
    pub feat_frac: f64,
    pub lambda: f64,
}

impl Default for BudgetFractions {
    fn default() -> Self {
        Self { edge_frac: 0.1, node_frac: 0.1, feat_frac: 0.1, lambda: 0.1 }
    }
}

impl BudgetFractions {
    pub fn validate(&self) -> Result<(), AttackError> {
        for (name, f) in [("edge_frac", self.edge_frac), ("node_frac", self.node_frac), ("feat_frac", self.feat_frac)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(AttackError::Budget(format!("{name} must lie in (0, 1], got {f}")));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(AttackError::Budget(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Per-graph budget: `edges` undirected flips, `nodes` target nodes with
/// `features` adjusted features each, step size `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub edges: usize,
    pub nodes: usize,
    pub features: usize,
    pub lambda: f64,
}

/// `⌈frac·count⌉`, at least one. The small slack keeps products such as
/// 0.1·20 from rounding up to 3.
fn ceil_frac(frac: f64, count: usize) -> usize {
    ((frac * count as f64 - 1e-9).ceil().max(1.0)) as usize
}

impl Budget {
    pub fn from_counts(nodes: usize, edges: usize, feature_dim: usize, fractions: &BudgetFractions) -> Result<Self, AttackError> {
        fractions.validate()?;
        if nodes == 0 || feature_dim == 0 {
            return Err(AttackError::Budget(format!("graph with {nodes} nodes and {feature_dim} features")));
        }
        Ok(Self {
            edges: ceil_frac(fractions.edge_frac, edges),
            nodes: ceil_frac(fractions.node_frac, nodes).min(nodes),
            features: ceil_frac(fractions.feat_frac, feature_dim).min(feature_dim),
            lambda: fractions.lambda,
        })
    }

    pub fn for_graph<T: Scalar>(graph: &Graph<T>, fractions: &BudgetFractions) -> Result<Self, AttackError> {
        Self::from_counts(graph.num_nodes(), graph.num_edges(), graph.feature_dim(), fractions)
    }
}
